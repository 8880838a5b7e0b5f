//! Prints the one-cycle learning-rate curve for the default training setup.

use revdict::optim::TrainConfig;

fn main() -> revdict::Result<()> {
    let cfg = TrainConfig::default();
    let train_size = 1000;
    let sched = cfg.schedule(train_size)?;
    let total = cfg.total_steps(train_size);
    println!(
        "{total} steps, peak at step {}, lr {:e} → {:e} → {:e}",
        sched.peak_step(),
        sched.initial_lr(),
        cfg.max_lr,
        sched.final_lr()
    );
    for step in (0..=total).step_by(total / 20) {
        let lr = sched.lr_at(step)?;
        let bar = "#".repeat((lr / cfg.max_lr * 50.0).round() as usize);
        println!("{step:>4} {lr:>10.3e} {bar}");
    }
    Ok(())
}
