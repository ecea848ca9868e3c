// A small recovery experiment: estimation error as the number of learners
// grows, with and without the true support supplied as tags.

use ordinal_factor::evaluation::{run_recovery_sweep, RecoveryConfig, RecoveryVariant, SweepAxis};

fn main() -> ordinal_factor::Result<()> {
    let mut cfg = RecoveryConfig::new(SweepAxis::Learners(vec![20, 80]));
    cfg.questions = 30;
    cfg.concepts = 3;
    cfg.trials = 2;
    cfg.max_outer_iters = 30;
    cfg.variants = vec![RecoveryVariant::Untagged, RecoveryVariant::Tagged];
    let report = run_recovery_sweep(&cfg)?;
    println!("{:<6} {:<9} {:>8} {:>8} {:>8}", "", "variant", "E_W", "E_C", "E_mu");
    for setting in ["N=20", "N=80"] {
        for v in &cfg.variants {
            let m = |metric| report.median(setting, v.name(), metric).unwrap_or(f64::NAN);
            println!("{setting:<6} {:<9} {:>8.4} {:>8.4} {:>8.4}", v.name(), m("e_w"), m("e_c"), m("e_mu"));
        }
    }
    Ok(())
}
