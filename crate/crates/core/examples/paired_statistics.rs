//! Paired t-test on first-attempt versus later-attempt scores, and the
//! special functions behind its p-value.
//!
//! ```bash
//! cargo run --example paired_statistics
//! ```

use facegame::statlab::{
    ln_gamma, paired_t_test, regularized_incomplete_beta, student_t_two_sided,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // First-attempt score and mean of the remaining attempts, per game.
    let first = [0.20, 0.33, 0.25, 0.50, 0.00, 0.40, 0.25, 0.33, 0.20, 0.50];
    let rest = [0.45, 0.50, 0.31, 0.62, 0.25, 0.40, 0.50, 0.58, 0.35, 0.55];
    let r = paired_t_test(&first, &rest)?;
    println!(
        "n = {}  mean {:.3} -> {:.3}  t({}) = {:.3}  p = {:.4}",
        r.n, r.mean_a, r.mean_b, r.df, r.t, r.p
    );

    for (t, df) in [(1.0, 1.0), (2.0, 10.0), (2.93, 215.0)] {
        println!(
            "two-sided p for t = {t} with {df} df: {:.6}",
            student_t_two_sided(t, df)
        );
    }
    println!("ln Γ(5) = {:.6} (ln 24 = {:.6})", ln_gamma(5.0), 24f64.ln());
    println!(
        "I_0.3(2, 3) = {:.6}",
        regularized_incomplete_beta(0.3, 2.0, 3.0)
    );
    Ok(())
}
