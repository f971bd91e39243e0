// Run the four standard instances and print the per-eps observables, the
// fitted rates, and the gate states.

use eotlab::config::presets;
use eotlab::estimates::run_sweep;
use eotlab::report::sweep_summary;

fn main() {
    for cfg in [
        presets::instance_a(),
        presets::instance_b(),
        presets::instance_c(),
        presets::instance_d(),
    ] {
        let t0 = std::time::Instant::now();
        match run_sweep(&cfg) {
            Ok(rep) => {
                println!(
                    "=== instance {} ({:.1}s wall, {:.1}s solver) ===",
                    rep.instance_id,
                    t0.elapsed().as_secs_f64(),
                    rep.solve_seconds
                );
                for r in &rep.records {
                    println!(
                        "  eps {:>6}: gap {:.6e} tgap {:.3e} det {:.3e} supu {:.3e} supg {:.3e} hess {:.3e} holder {:.4} iters {} res {:.2e}",
                        r.epsilon, r.gap, r.transport_gap, r.detachment_integral,
                        r.sup_u_err, r.sup_grad_err, r.hess_norm, r.holder.overall,
                        r.iterations, r.residual
                    );
                }
                print!("{}", sweep_summary(&rep));
            }
            Err(e) => println!("instance {} failed: {e}", cfg.instance.id),
        }
    }
}
