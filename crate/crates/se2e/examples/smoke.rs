use se2e::*;
use se2e::chain::{DayInputs, DayWarm};
use se2e::train::{pretrain, hsgd_epoch};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let t0 = std::time::Instant::now();
    let file = gridflow::ieee33_file();
    let net = gridflow::Network::from_file(&file, gridflow::Scenario::Safety).unwrap();
    let dev = gridflow::DeviceSet::from_file(&file.devices, &net).unwrap();
    let dataset = forecast::generate_synthetic(42, 60, &dev).unwrap();
    println!("dataset: {:.2}s", t0.elapsed().as_secs_f64());

    let config = TrainConfig { scenario: gridflow::Scenario::Safety, seed: 1, pretrain_epochs: 3, train_epochs: 1, ..Default::default() };
    let ctx = RunContext::new(&file, &config).unwrap();
    let mut models = chain::ModelSet::new(&dataset, &config).unwrap();

    let t0 = std::time::Instant::now();
    let curves = pretrain(&mut models, &dataset, 3).unwrap();
    println!("pretrain 3 epochs: {:.2}s, first-epoch mse {:?}", t0.elapsed().as_secs_f64(),
        curves[0].iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    println!("last-epoch mse {:?}", curves.last().unwrap().iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());

    // single day timing breakdown
    let inputs = DayInputs::from_record(&dataset.train()[30]);
    let t0 = std::time::Instant::now();
    let day = chain::run_day(&ctx, &models, &inputs, false, None).map_err(|e| format!("{e:?}")).unwrap();
    println!("one day forward (cold): {:.0} ms, mean dec iters {:.0}, eval iters {:.0}",
        t0.elapsed().as_secs_f64()*1e3,
        day.per_t.iter().map(|o| o.dec_iterations).sum::<usize>() as f64 / 24.0,
        day.per_t.iter().map(|o| o.eval_iterations).sum::<usize>() as f64 / 24.0);
    let mut warm = DayWarm::new(24);
    let _ = chain::run_day(&ctx, &models, &inputs, true, Some(&mut warm)).map_err(|e| format!("{e:?}")).unwrap();
    let t0 = std::time::Instant::now();
    let day = chain::run_day(&ctx, &models, &inputs, true, Some(&mut warm)).map_err(|e| format!("{e:?}")).unwrap();
    println!("one day fwd+bwd (warm): {:.0} ms, mean dec iters {:.0}, eval iters {:.0}",
        t0.elapsed().as_secs_f64()*1e3,
        day.per_t.iter().map(|o| o.dec_iterations).sum::<usize>() as f64 / 24.0,
        day.per_t.iter().map(|o| o.eval_iterations).sum::<usize>() as f64 / 24.0);
    println!("reg loss day: {:.5} pu; violations at {} of 24 t", day.reg_loss_pu,
        day.per_t.iter().filter(|o| o.penalty_pu2 > 1e-6).count());

    // one full hsgd epoch
    let mut warm: Vec<DayWarm> = (0..dataset.train().len()).map(|_| DayWarm::new(24)).collect();
    let t0 = std::time::Instant::now();
    let out = hsgd_epoch(&ctx, &mut models, &dataset, 0, &mut warm).unwrap();
    let iters: usize = warm.iter().map(|_| 0usize).sum::<usize>();
    let _ = iters;
    println!("hsgd epoch (48 days, cold): {:.1}s; stats: reg {:.5}, loss {:.2} kW, viol {:.2}%, skipped {}",
        t0.elapsed().as_secs_f64(), out.stats.mean_reg_loss_pu, out.stats.mean_loss_kw,
        out.stats.violation_rate*100.0, out.stats.days_skipped);
    for ep in 1..3 {
        let t0 = std::time::Instant::now();
        let out = hsgd_epoch(&ctx, &mut models, &dataset, ep, &mut warm).unwrap();
        println!("hsgd epoch {} (warm): {:.1}s; reg {:.5}, loss {:.2} kW", ep,
            t0.elapsed().as_secs_f64(), out.stats.mean_reg_loss_pu, out.stats.mean_loss_kw);
    }
    // measure per-day iteration counts in steady state
    let inputs = DayInputs::from_record(&dataset.train()[20]);
    let t0 = std::time::Instant::now();
    let day = chain::run_day(&ctx, &models, &inputs, true, Some(&mut warm[20])).map_err(|e| format!("{e:?}")).unwrap();
    println!("steady-state day 20: {:.0} ms, dec iters {:.0}, eval iters {:.0}",
        t0.elapsed().as_secs_f64()*1e3,
        day.per_t.iter().map(|o| o.dec_iterations).sum::<usize>() as f64 / 24.0,
        day.per_t.iter().map(|o| o.eval_iterations).sum::<usize>() as f64 / 24.0);
}
