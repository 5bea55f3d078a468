//! Runs the stock main-bound families and prints the fitted slopes.

use std::time::Instant;

use tracephase::harness::main_family;
use tracephase::quadrature::verify_main_bound;

fn main() -> tracephase::Result<()> {
    let names: Vec<String> = std::env::args().skip(1).collect();
    let names = if names.is_empty() {
        vec!["rationals".into(), "sqrt2".into(), "gaussian".into(), "sqrt2-degenerate".into()]
    } else {
        names
    };
    for name in names {
        let t = Instant::now();
        let (family, expected) = main_family(&name)?;
        let rep = verify_main_bound(&family, 1e-7, None)?;
        for r in &rep.rows {
            println!("{name:>18} λ={:<6} |I|={:.6e} H={:.6e} |I|H={:.4} converged={}", r.param, r.abs_i, r.h, r.product, r.converged);
        }
        println!(
            "{name:>18} slope_i={:.4} (expected {expected}) slope_h={:.4} max/median={:.3} [{:.1?}]",
            rep.slope_i,
            rep.slope_h,
            rep.max_over_median,
            t.elapsed()
        );
    }
    Ok(())
}
