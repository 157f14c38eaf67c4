//! Compilation of the feeder model into standard-form conic programs.
//!
//! All three builders share one flow core per timestep: active/reactive
//! balance equalities at every non-slack bus, the linear voltage-drop
//! equation per branch, a pinned slack voltage, and one four-dimensional
//! second-order cone per branch for `||(2P, 2Q, l - v)|| <= l + v`.
//!
//! The multi-period program separates across timesteps (nothing couples
//! them), so a builder emits exactly one timestep per call.
//!
//! Everything external that can vary between instances (predictions, loads,
//! fixed var setpoints, DG headroom) enters the right-hand side `b`; the
//! returned [`ParamMap`] records which rows each parameter occupies and with
//! what coefficient, so instances can be re-assembled cheaply and gradients
//! with respect to `b` can be pulled back to parameters.

use conic::{ConeSpec, ConicProblem, SparseMatrix};

use crate::network::{DeviceSet, GridError, Injections, Network};

/// An external parameter of a compiled problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKey {
    /// PV site output, kW.
    PvSite(usize),
    /// Active load at a bus, kW.
    LoadP(usize),
    /// Reactive load at a bus, kvar.
    LoadQ(usize),
    /// Fixed var setpoint of an SVC (evaluation problem only), kvar.
    QReg(usize),
}

/// Variable offsets of a compiled problem. Index helpers return positions in
/// the primal vector.
#[derive(Debug, Clone)]
pub struct VarLayout {
    pub nb: usize,
    pub nbr: usize,
    pub nsvc: usize,
    pub ndg: usize,
    pub v0: usize,
    pub l0: usize,
    pub p0: usize,
    pub q0: usize,
    pub q_reg0: Option<usize>,
    pub loss0: Option<usize>,
    pub s_plus0: Option<usize>,
    pub s_minus0: Option<usize>,
    pub q_dg0: Option<usize>,
    pub volt_dev0: Option<usize>,
    pub n: usize,
}

impl VarLayout {
    pub fn v(&self, bus: usize) -> usize {
        self.v0 + bus
    }
    pub fn l(&self, branch: usize) -> usize {
        self.l0 + branch
    }
    pub fn p(&self, branch: usize) -> usize {
        self.p0 + branch
    }
    pub fn q(&self, branch: usize) -> usize {
        self.q0 + branch
    }
    pub fn q_reg(&self, device: usize) -> Option<usize> {
        self.q_reg0.map(|o| o + device)
    }
    pub fn s_plus(&self, bus: usize) -> Option<usize> {
        debug_assert!(bus >= 1);
        self.s_plus0.map(|o| o + bus - 1)
    }
    pub fn s_minus(&self, bus: usize) -> Option<usize> {
        debug_assert!(bus >= 1);
        self.s_minus0.map(|o| o + bus - 1)
    }
    pub fn q_dg(&self, device: usize) -> Option<usize> {
        self.q_dg0.map(|o| o + device)
    }
}

/// Row offsets of the equality section (fixed across all builders).
#[derive(Debug, Clone)]
pub struct RowLayout {
    pub nb: usize,
    pub p_bal0: usize,
    pub q_bal0: usize,
    pub vdrop0: usize,
    pub slack_row: usize,
    pub zero_rows: usize,
}

impl RowLayout {
    /// Active-power balance row of a non-slack bus.
    pub fn p_bal(&self, bus: usize) -> usize {
        debug_assert!(bus >= 1);
        self.p_bal0 + bus - 1
    }
    pub fn q_bal(&self, bus: usize) -> usize {
        debug_assert!(bus >= 1);
        self.q_bal0 + bus - 1
    }
}

/// DG var-capacity row: the right-hand side is `sqrt(S^2 - p^2)` of the
/// site's predicted output, so it carries a nonlinear sensitivity rather
/// than a fixed coefficient.
#[derive(Debug, Clone)]
pub struct DgCapRow {
    pub device: usize,
    pub pv_site: usize,
    pub row: usize,
    pub s_dg_kw: f64,
}

#[derive(Debug, Clone)]
pub struct ParamMap {
    entries: Vec<(ParamKey, Vec<(usize, f64)>)>,
    dg_caps: Vec<DgCapRow>,
    base_b: Vec<f64>,
    base_kw: f64,
    pub layout: VarLayout,
    pub rows: RowLayout,
}

/// Parameter values used to assemble an instance right-hand side.
#[derive(Debug, Clone, Copy)]
pub struct ParamValues<'a> {
    /// kW per PV site.
    pub pv_kw: &'a [f64],
    /// kW per bus.
    pub load_p_kw: &'a [f64],
    /// kvar per bus.
    pub load_q_kvar: &'a [f64],
    /// kvar per SVC; only consumed by evaluation problems.
    pub q_reg_kvar: Option<&'a [f64]>,
}

/// Parameter gradients produced by pulling a `db` vector back through the map.
#[derive(Debug, Clone, Default)]
pub struct ParamGradOut {
    pub d_pv_kw: Vec<f64>,
    pub d_load_p_kw: Vec<f64>,
    pub d_load_q_kvar: Vec<f64>,
    pub d_qreg_kvar: Vec<f64>,
}

impl ParamMap {
    fn value_of(&self, key: ParamKey, vals: &ParamValues) -> Result<f64, GridError> {
        let get = |slice: &[f64], i: usize, what: &str| {
            slice.get(i).copied().ok_or_else(|| {
                GridError::Injection(format!("missing {what} value at index {i}"))
            })
        };
        match key {
            ParamKey::PvSite(i) => get(vals.pv_kw, i, "pv"),
            ParamKey::LoadP(b) => get(vals.load_p_kw, b, "load p"),
            ParamKey::LoadQ(b) => get(vals.load_q_kvar, b, "load q"),
            ParamKey::QReg(d) => {
                let q = vals.q_reg_kvar.ok_or_else(|| {
                    GridError::Injection("q_reg values required for this problem".into())
                })?;
                get(q, d, "q_reg")
            }
        }
    }

    /// Assembles the right-hand side for new parameter values, reusing the
    /// compiled structure.
    pub fn assemble_b(&self, vals: &ParamValues) -> Result<Vec<f64>, GridError> {
        let mut b = self.base_b.clone();
        for (key, rows) in &self.entries {
            let value = self.value_of(*key, vals)?;
            for &(row, coeff) in rows {
                b[row] += coeff * value;
            }
        }
        for cap in &self.dg_caps {
            let p = self.value_of(ParamKey::PvSite(cap.pv_site), vals)?;
            b[cap.row] += dg_headroom_kvar(cap.s_dg_kw, p) / self.base_kw;
        }
        Ok(b)
    }

    /// Pulls a gradient with respect to `b` back to the external parameters.
    pub fn pull_back(&self, db: &[f64], vals: &ParamValues) -> Result<ParamGradOut, GridError> {
        let mut out = ParamGradOut {
            d_pv_kw: vec![0.0; vals.pv_kw.len()],
            d_load_p_kw: vec![0.0; vals.load_p_kw.len()],
            d_load_q_kvar: vec![0.0; vals.load_q_kvar.len()],
            d_qreg_kvar: vec![0.0; vals.q_reg_kvar.map_or(0, |q| q.len())],
        };
        for (key, rows) in &self.entries {
            let g: f64 = rows.iter().map(|&(row, coeff)| coeff * db[row]).sum();
            match key {
                ParamKey::PvSite(i) => out.d_pv_kw[*i] += g,
                ParamKey::LoadP(b) => out.d_load_p_kw[*b] += g,
                ParamKey::LoadQ(b) => out.d_load_q_kvar[*b] += g,
                ParamKey::QReg(d) => out.d_qreg_kvar[*d] += g,
            }
        }
        for cap in &self.dg_caps {
            let p = self.value_of(ParamKey::PvSite(cap.pv_site), vals)?;
            out.d_pv_kw[cap.pv_site] +=
                db[cap.row] * dg_headroom_sensitivity(cap.s_dg_kw, p) / self.base_kw;
        }
        Ok(out)
    }

    pub fn entries(&self) -> &[(ParamKey, Vec<(usize, f64)>)] {
        &self.entries
    }

    pub fn dg_caps(&self) -> &[DgCapRow] {
        &self.dg_caps
    }
}

/// Var headroom `sqrt(S^2 - p^2)` of an inverter, clamped at zero when the
/// active output exceeds the rating.
pub fn dg_headroom_kvar(s_kva: f64, p_kw: f64) -> f64 {
    let d = s_kva * s_kva - p_kw * p_kw;
    if d <= 0.0 {
        log::warn!("DG active output {p_kw} kW exceeds rating {s_kva} kVA; var headroom clamped to 0");
        0.0
    } else {
        d.sqrt()
    }
}

/// d(headroom)/d(p): `-p / sqrt(S^2 - p^2)`, zero once clamped.
pub fn dg_headroom_sensitivity(s_kva: f64, p_kw: f64) -> f64 {
    let d = s_kva * s_kva - p_kw * p_kw;
    if d <= 0.0 {
        0.0
    } else {
        -p_kw / d.sqrt()
    }
}

// ---------------------------------------------------------------------------
// assembly scaffolding
// ---------------------------------------------------------------------------

struct Row {
    coeffs: Vec<(usize, f64)>,
    b: f64,
}

struct Assembler {
    n: usize,
    zero: Vec<Row>,
    nonneg: Vec<Row>,
    soc: Vec<Vec<Row>>,
    c: Vec<f64>,
}

impl Assembler {
    fn new(n: usize) -> Self {
        Self {
            n,
            zero: Vec::new(),
            nonneg: Vec::new(),
            soc: Vec::new(),
            c: vec![0.0; n],
        }
    }

    fn eq(&mut self, coeffs: Vec<(usize, f64)>, b: f64) -> RowRef {
        self.zero.push(Row { coeffs, b });
        RowRef::Zero(self.zero.len() - 1)
    }

    fn leq(&mut self, coeffs: Vec<(usize, f64)>, b: f64) -> RowRef {
        self.nonneg.push(Row { coeffs, b });
        RowRef::Nonneg(self.nonneg.len() - 1)
    }

    fn soc_block(&mut self, rows: Vec<Row>) {
        self.soc.push(rows);
    }

    fn finish(self) -> Result<(ConicProblem, RowResolver), GridError> {
        let zero_dim = self.zero.len();
        let nonneg_dim = self.nonneg.len();
        let soc_dims: Vec<usize> = self.soc.iter().map(|b| b.len()).collect();
        let m = zero_dim + nonneg_dim + soc_dims.iter().sum::<usize>();
        let mut triplets = Vec::new();
        let mut b = vec![0.0; m];
        let mut row = 0usize;
        for section in [self.zero, self.nonneg].into_iter() {
            for r in section {
                for (col, vv) in r.coeffs {
                    triplets.push((row, col, vv));
                }
                b[row] = r.b;
                row += 1;
            }
        }
        for block in self.soc {
            for r in block {
                for (col, vv) in r.coeffs {
                    triplets.push((row, col, vv));
                }
                b[row] = r.b;
                row += 1;
            }
        }
        let a = SparseMatrix::from_triplets(m, self.n, &triplets)?;
        let cones = ConeSpec::new(zero_dim, nonneg_dim, soc_dims)?;
        let problem = ConicProblem::new(a, b, self.c, cones)?;
        Ok((problem, RowResolver { zero_dim }))
    }
}

#[derive(Clone, Copy)]
enum RowRef {
    Zero(usize),
    Nonneg(usize),
}

struct RowResolver {
    zero_dim: usize,
}

impl RowResolver {
    fn resolve(&self, r: RowRef) -> usize {
        match r {
            RowRef::Zero(i) => i,
            RowRef::Nonneg(i) => self.zero_dim + i,
        }
    }
}

// ---------------------------------------------------------------------------
// shared flow core
// ---------------------------------------------------------------------------

struct FlowCore {
    /// Balance-row parameter entries in kW/kvar units: (key, row-ref, coeff).
    param_entries: Vec<(ParamKey, RowRef, f64)>,
    rows: (Vec<RowRef>, Vec<RowRef>),
}

/// Emits the equalities shared by all problem kinds. `q_source` adds
/// variable terms (SVC or DG vars) into bus reactive balances.
fn flow_core(
    asm: &mut Assembler,
    net: &Network,
    layout: &VarLayout,
    inj: &Injections,
    t: usize,
    pv: &[(usize, f64)],
    q_var_at_bus: impl Fn(usize) -> Vec<(usize, f64)>,
) -> Result<FlowCore, GridError> {
    if t >= inj.horizon {
        return Err(GridError::Injection(format!(
            "timestep {t} beyond horizon {}",
            inj.horizon
        )));
    }
    let nb = net.bus_count();
    let base = net.base_kw();
    let mut params = Vec::new();
    let mut p_rows = Vec::with_capacity(nb - 1);
    let mut q_rows = Vec::with_capacity(nb - 1);

    // bus adjacency: parent branch and child branches
    let mut parent = vec![usize::MAX; nb];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (k, br) in net.branches.iter().enumerate() {
        parent[br.to] = k;
        children[br.from].push(k);
    }
    let mut pv_at_bus: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (site, &(bus, _)) in pv.iter().enumerate() {
        pv_at_bus[bus].push(site);
    }

    for bus in 1..nb {
        let pk = parent[bus];
        let br = &net.branches[pk];
        debug_assert_eq!(br.to, bus);

        // active balance: sum_out P - (P_parent - r l_parent) = p_pv - p_d
        let mut coeffs = vec![(layout.p(pk), -1.0), (layout.l(pk), br.r_pu)];
        for &ck in &children[bus] {
            coeffs.push((layout.p(ck), 1.0));
        }
        for &site in &pv_at_bus[bus] {
            params.push((ParamKey::PvSite(site), RowRef::Zero(asm.zero.len()), 1.0 / base));
        }
        params.push((ParamKey::LoadP(bus), RowRef::Zero(asm.zero.len()), -1.0 / base));
        let r = asm.eq(coeffs, 0.0);
        p_rows.push(r);

        // reactive balance: sum_out Q - (Q_parent - x l_parent) - q_vars = -q_d (+ q_reg param)
        let mut coeffs = vec![(layout.q(pk), -1.0), (layout.l(pk), br.x_pu)];
        for &ck in &children[bus] {
            coeffs.push((layout.q(ck), 1.0));
        }
        for (var, sign) in q_var_at_bus(bus) {
            coeffs.push((var, sign));
        }
        params.push((ParamKey::LoadQ(bus), RowRef::Zero(asm.zero.len()), -1.0 / base));
        let r = asm.eq(coeffs, 0.0);
        q_rows.push(r);
    }

    // voltage drop: v_to - v_from - (r^2 + x^2) l + 2 (r P + x Q) = 0
    for (k, br) in net.branches.iter().enumerate() {
        let z2 = br.r_pu * br.r_pu + br.x_pu * br.x_pu;
        asm.eq(
            vec![
                (layout.v(br.to), 1.0),
                (layout.v(br.from), -1.0),
                (layout.l(k), -z2),
                (layout.p(k), 2.0 * br.r_pu),
                (layout.q(k), 2.0 * br.x_pu),
            ],
            0.0,
        );
    }

    // slack voltage pin
    asm.eq(vec![(layout.v(0), 1.0)], net.slack_v2());

    Ok(FlowCore {
        param_entries: params,
        rows: (p_rows, q_rows),
    })
}

fn soc_blocks(asm: &mut Assembler, net: &Network, layout: &VarLayout) {
    for (k, br) in net.branches.iter().enumerate() {
        asm.soc_block(vec![
            Row {
                coeffs: vec![(layout.l(k), -1.0), (layout.v(br.from), -1.0)],
                b: 0.0,
            },
            Row {
                coeffs: vec![(layout.p(k), -2.0)],
                b: 0.0,
            },
            Row {
                coeffs: vec![(layout.q(k), -2.0)],
                b: 0.0,
            },
            Row {
                coeffs: vec![(layout.l(k), -1.0), (layout.v(br.from), 1.0)],
                b: 0.0,
            },
        ]);
    }
}

fn voltage_box(asm: &mut Assembler, net: &Network, layout: &VarLayout) {
    for bus in 1..net.bus_count() {
        asm.leq(vec![(layout.v(bus), 1.0)], net.v_max2());
        asm.leq(vec![(layout.v(bus), -1.0)], -net.v_min2());
    }
}

fn current_box(asm: &mut Assembler, net: &Network, layout: &VarLayout) {
    for (k, br) in net.branches.iter().enumerate() {
        asm.leq(vec![(layout.l(k), 1.0)], br.l_max_pu);
        asm.leq(vec![(layout.l(k), -1.0)], 0.0);
    }
}

fn finish_with_params(
    asm: Assembler,
    core: FlowCore,
    dg_caps: Vec<(usize, usize, RowRef, f64)>,
    layout: VarLayout,
    net: &Network,
) -> Result<(ConicProblem, ParamMap), GridError> {
    let nb = net.bus_count();
    let (problem, resolver) = asm.finish()?;
    let mut entries: std::collections::HashMap<ParamKey, Vec<(usize, f64)>> =
        std::collections::HashMap::new();
    for (key, rowref, coeff) in core.param_entries {
        entries
            .entry(key)
            .or_default()
            .push((resolver.resolve(rowref), coeff));
    }
    let mut entries: Vec<(ParamKey, Vec<(usize, f64)>)> = entries.into_iter().collect();
    entries.sort_by_key(|(k, _)| match *k {
        ParamKey::PvSite(i) => (0, i),
        ParamKey::LoadP(b) => (1, b),
        ParamKey::LoadQ(b) => (2, b),
        ParamKey::QReg(d) => (3, d),
    });
    let rows = RowLayout {
        nb,
        p_bal0: resolver.resolve(core.rows.0[0]),
        q_bal0: resolver.resolve(core.rows.1[0]),
        vdrop0: 2 * (nb - 1),
        slack_row: 3 * (nb - 1),
        zero_rows: 3 * (nb - 1) + 1,
    };
    // builders emit zero on every parameter row, so the assembled b is the
    // structural part alone and assemble_b produces instances bit-exactly
    let base_b = problem.b.clone();
    let dg_caps: Vec<DgCapRow> = dg_caps
        .into_iter()
        .map(|(device, pv_site, rowref, s_dg_kw)| DgCapRow {
            device,
            pv_site,
            row: resolver.resolve(rowref),
            s_dg_kw,
        })
        .collect();
    let map = ParamMap {
        entries,
        dg_caps,
        base_b,
        base_kw: net.base_kw(),
        layout,
        rows,
    };
    Ok((problem, map))
}

// ---------------------------------------------------------------------------
// decision problem
// ---------------------------------------------------------------------------

/// Var-dispatch problem for one timestep: minimize total line losses over
/// SVC setpoints subject to the branch-flow relaxation, the voltage box,
/// current limits, and device bounds. Predictions and loads are parameters
/// in `b`, recorded in the returned map.
pub fn build_decision_problem(
    net: &Network,
    dev: &DeviceSet,
    inj: &Injections,
    t: usize,
) -> Result<(ConicProblem, ParamMap), GridError> {
    let nb = net.bus_count();
    let nbr = net.branch_count();
    let nsvc = dev.svc.len();
    let layout = VarLayout {
        nb,
        nbr,
        nsvc,
        ndg: 0,
        v0: 0,
        l0: nb,
        p0: nb + nbr,
        q0: nb + 2 * nbr,
        q_reg0: Some(nb + 3 * nbr),
        loss0: None,
        s_plus0: None,
        s_minus0: None,
        q_dg0: None,
        volt_dev0: None,
        n: nb + 3 * nbr + nsvc,
    };
    if inj.p_pv.len() != dev.pv.len() {
        return Err(GridError::Injection(format!(
            "{} PV series for {} PV sites",
            inj.p_pv.len(),
            dev.pv.len()
        )));
    }
    let mut asm = Assembler::new(layout.n);
    for (k, br) in net.branches.iter().enumerate() {
        asm.c[layout.l(k)] = br.r_pu;
    }
    let mut svc_at_bus: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (d, &(bus, _, _)) in dev.svc.iter().enumerate() {
        svc_at_bus[bus].push(d);
    }
    let core = flow_core(
        &mut asm,
        net,
        &layout,
        inj,
        t,
        &dev.pv,
        |bus| {
            svc_at_bus[bus]
                .iter()
                .map(|&d| (layout.q_reg(d).unwrap(), -1.0))
                .collect()
        },
    )?;
    voltage_box(&mut asm, net, &layout);
    current_box(&mut asm, net, &layout);
    let base = net.base_kw();
    for (d, &(_, qmin, qmax)) in dev.svc.iter().enumerate() {
        let var = layout.q_reg(d).unwrap();
        asm.leq(vec![(var, 1.0)], qmax / base);
        asm.leq(vec![(var, -1.0)], -qmin / base);
    }
    soc_blocks(&mut asm, net, &layout);
    let (problem, map) = finish_with_params(asm, core, Vec::new(), layout, net)?;
    let vals = ParamValues {
        pv_kw: &inj.p_pv.iter().map(|s| s[t]).collect::<Vec<_>>(),
        load_p_kw: &inj.p_d.iter().map(|s| s[t]).collect::<Vec<_>>(),
        load_q_kvar: &inj.q_d.iter().map(|s| s[t]).collect::<Vec<_>>(),
        q_reg_kvar: None,
    };
    let b = map.assemble_b(&vals)?;
    let problem = ConicProblem::new(problem.a, b, problem.c, problem.cones)?;
    Ok((problem, map))
}

// ---------------------------------------------------------------------------
// evaluation problem
// ---------------------------------------------------------------------------

/// Decision-evaluating problem: fixes the var setpoints (clamped to device
/// bounds), runs the flow under ground-truth injections, and minimizes
/// `L_loss + lambda * sum(violations)` in epigraph form. There is no voltage
/// box: violations are penalized through the ReLU slacks `s+`/`s-`, not
/// forbidden, so the evaluator can always score a decision.
pub fn build_evaluation_problem(
    net: &Network,
    dev: &DeviceSet,
    q_reg_kvar: &[f64],
    truth: &Injections,
    lambda: f64,
    t: usize,
) -> Result<(ConicProblem, ParamMap), GridError> {
    let nb = net.bus_count();
    let nbr = net.branch_count();
    if q_reg_kvar.len() != dev.svc.len() {
        return Err(GridError::Device(format!(
            "{} setpoints for {} SVCs",
            q_reg_kvar.len(),
            dev.svc.len()
        )));
    }
    let mut clamped = q_reg_kvar.to_vec();
    let mut clamps = 0;
    for (q, &(_, qmin, qmax)) in clamped.iter_mut().zip(&dev.svc) {
        let c = q.clamp(qmin, qmax);
        if c != *q {
            clamps += 1;
            *q = c;
        }
    }
    if clamps > 0 {
        log::debug!("clamped {clamps} var setpoints to device bounds before evaluation");
    }

    let layout = VarLayout {
        nb,
        nbr,
        nsvc: 0,
        ndg: 0,
        v0: 0,
        l0: nb,
        p0: nb + nbr,
        q0: nb + 2 * nbr,
        q_reg0: None,
        loss0: Some(nb + 3 * nbr),
        s_plus0: Some(nb + 3 * nbr + 1),
        s_minus0: Some(nb + 3 * nbr + 1 + (nb - 1)),
        q_dg0: None,
        volt_dev0: None,
        n: nb + 3 * nbr + 1 + 2 * (nb - 1),
    };
    let mut asm = Assembler::new(layout.n);
    let loss_var = layout.loss0.unwrap();
    asm.c[loss_var] = 1.0;
    for bus in 1..nb {
        asm.c[layout.s_plus(bus).unwrap()] = lambda;
        asm.c[layout.s_minus(bus).unwrap()] = lambda;
    }

    let mut core = flow_core(&mut asm, net, &layout, truth, t, &dev.pv, |_| Vec::new())?;
    for (d, &(bus, _, _)) in dev.svc.iter().enumerate() {
        let rowref = core.rows.1[bus - 1];
        core.param_entries
            .push((ParamKey::QReg(d), rowref, 1.0 / net.base_kw()));
    }

    // epigraph of the losses: sum r l - L <= 0
    let mut epi = vec![(loss_var, -1.0)];
    for (k, br) in net.branches.iter().enumerate() {
        epi.push((layout.l(k), br.r_pu));
    }
    asm.leq(epi, 0.0);
    // violation slacks: s+ >= v - vmax^2, s- >= vmin^2 - v, both nonnegative
    for bus in 1..nb {
        let sp = layout.s_plus(bus).unwrap();
        let sm = layout.s_minus(bus).unwrap();
        asm.leq(vec![(layout.v(bus), 1.0), (sp, -1.0)], net.v_max2());
        asm.leq(vec![(sp, -1.0)], 0.0);
        asm.leq(vec![(layout.v(bus), -1.0), (sm, -1.0)], -net.v_min2());
        asm.leq(vec![(sm, -1.0)], 0.0);
    }
    soc_blocks(&mut asm, net, &layout);

    let (problem, map) = finish_with_params(asm, core, Vec::new(), layout, net)?;
    // bake the fixed setpoints into b
    let vals = ParamValues {
        pv_kw: &truth.p_pv.iter().map(|s| s[t]).collect::<Vec<_>>(),
        load_p_kw: &truth.p_d.iter().map(|s| s[t]).collect::<Vec<_>>(),
        load_q_kvar: &truth.q_d.iter().map(|s| s[t]).collect::<Vec<_>>(),
        q_reg_kvar: Some(&clamped),
    };
    let b = map.assemble_b(&vals)?;
    let problem = ConicProblem::new(problem.a, b, problem.c, problem.cones)?;
    Ok((problem, map))
}

// ---------------------------------------------------------------------------
// multi-objective variant with DG var support
// ---------------------------------------------------------------------------

/// Decision problem extended with inverter-based DG var variables, their
/// prediction-dependent capacity rows `q_dg <= sqrt(S^2 - p^2)`, a voltage
/// deviation term `alpha1 * sum (v - v_hat)^2` (encoded per bus through an
/// SOC epigraph, omitted when `alpha1 == 0`), and a linear regulation cost
/// `alpha2 * (sum q_reg + sum q_dg)`.
pub fn build_multiobjective_problem(
    net: &Network,
    dev: &DeviceSet,
    inj: &Injections,
    weights: (f64, f64),
    nominal_v_pu: f64,
    t: usize,
) -> Result<(ConicProblem, ParamMap), GridError> {
    let (alpha1, alpha2) = weights;
    if dev.dg.is_empty() {
        return Err(GridError::Device(
            "multi-objective variant needs a non-empty DG fleet".into(),
        ));
    }
    let nb = net.bus_count();
    let nbr = net.branch_count();
    let nsvc = dev.svc.len();
    let ndg = dev.dg.len();
    let with_dev = alpha1 > 0.0;
    let q_dg0 = nb + 3 * nbr + nsvc;
    let layout = VarLayout {
        nb,
        nbr,
        nsvc,
        ndg,
        v0: 0,
        l0: nb,
        p0: nb + nbr,
        q0: nb + 2 * nbr,
        q_reg0: Some(nb + 3 * nbr),
        loss0: None,
        s_plus0: None,
        s_minus0: None,
        q_dg0: Some(q_dg0),
        volt_dev0: with_dev.then_some(q_dg0 + ndg),
        n: q_dg0 + ndg + if with_dev { nb - 1 } else { 0 },
    };
    let mut asm = Assembler::new(layout.n);
    for (k, br) in net.branches.iter().enumerate() {
        asm.c[layout.l(k)] = br.r_pu;
    }
    for d in 0..nsvc {
        asm.c[layout.q_reg(d).unwrap()] = alpha2;
    }
    for d in 0..ndg {
        asm.c[layout.q_dg(d).unwrap()] = alpha2;
    }
    if let Some(tau0) = layout.volt_dev0 {
        for k in 0..nb - 1 {
            asm.c[tau0 + k] = alpha1;
        }
    }

    let mut svc_at_bus: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (d, &(bus, _, _)) in dev.svc.iter().enumerate() {
        svc_at_bus[bus].push(d);
    }
    let mut dg_at_bus: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (d, &(bus, _)) in dev.dg.iter().enumerate() {
        dg_at_bus[bus].push(d);
    }
    let core = flow_core(
        &mut asm,
        net,
        &layout,
        inj,
        t,
        &dev.pv,
        |bus| {
            let mut vars: Vec<(usize, f64)> = svc_at_bus[bus]
                .iter()
                .map(|&d| (layout.q_reg(d).unwrap(), -1.0))
                .collect();
            vars.extend(dg_at_bus[bus].iter().map(|&d| (layout.q_dg(d).unwrap(), -1.0)));
            vars
        },
    )?;
    voltage_box(&mut asm, net, &layout);
    current_box(&mut asm, net, &layout);
    let base = net.base_kw();
    for (d, &(_, qmin, qmax)) in dev.svc.iter().enumerate() {
        let var = layout.q_reg(d).unwrap();
        asm.leq(vec![(var, 1.0)], qmax / base);
        asm.leq(vec![(var, -1.0)], -qmin / base);
    }
    // DG var bounds: 0 <= q_dg <= sqrt(S^2 - p_hat^2); the upper row's RHS
    // tracks the prediction through the map's nonlinear sensitivity record.
    let mut dg_caps = Vec::with_capacity(ndg);
    let mut pv_site_of_bus: std::collections::HashMap<usize, usize> = Default::default();
    for (site, &(bus, _)) in dev.pv.iter().enumerate() {
        pv_site_of_bus.insert(bus, site);
    }
    for (d, &(bus, s_kva)) in dev.dg.iter().enumerate() {
        let site = *pv_site_of_bus.get(&bus).ok_or_else(|| {
            GridError::Device(format!(
                "DG at bus index {bus} has no co-located PV site to read the active output from"
            ))
        })?;
        let var = layout.q_dg(d).unwrap();
        let row = asm.leq(vec![(var, 1.0)], 0.0); // rhs assembled via map
        asm.leq(vec![(var, -1.0)], 0.0);
        dg_caps.push((d, site, row, s_kva));
    }
    // voltage deviation epigraph: tau >= (v - v_hat)^2 via
    // ||(2(v - v_hat), tau - 1)|| <= tau + 1
    if let Some(tau0) = layout.volt_dev0 {
        let vhat2 = nominal_v_pu * nominal_v_pu;
        for bus in 1..nb {
            let tau = tau0 + bus - 1;
            asm.soc_block(vec![
                Row {
                    coeffs: vec![(tau, -1.0)],
                    b: 1.0,
                },
                Row {
                    coeffs: vec![(layout.v(bus), -2.0)],
                    b: -2.0 * vhat2,
                },
                Row {
                    coeffs: vec![(tau, -1.0)],
                    b: -1.0,
                },
            ]);
        }
    }
    soc_blocks(&mut asm, net, &layout);
    let (problem, map) = finish_with_params(asm, core, dg_caps, layout, net)?;
    // bake current predictions into the capacity rows
    let vals = ParamValues {
        pv_kw: &inj.p_pv.iter().map(|s| s[t]).collect::<Vec<_>>(),
        load_p_kw: &inj.p_d.iter().map(|s| s[t]).collect::<Vec<_>>(),
        load_q_kvar: &inj.q_d.iter().map(|s| s[t]).collect::<Vec<_>>(),
        q_reg_kvar: None,
    };
    let b = map.assemble_b(&vals)?;
    let problem = ConicProblem::new(problem.a, b, problem.c, problem.cones)?;
    Ok((problem, map))
}
