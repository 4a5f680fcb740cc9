//! The variable mollification radius profile and its derivative
//! certificates.
//!
//! Run with: cargo run --release --example profile_certificate

use mz::truncation::make_profile;

fn main() -> mz::Result<()> {
    for eps in [0.01, 0.05, 0.099] {
        let profile = make_profile(eps, 1.0)?;
        let cert = profile.certificate(100_000);
        println!(
            "eps = {eps:>5}: max|rho'| = {:.6} (budget {:.6}), ess max|rho''| = {:.4} (budget {:.4}), ok = {}",
            cert.max_abs_d1, cert.d1_bound, cert.ess_max_abs_d2, cert.d2_bound, cert.satisfied
        );
    }
    // Profile shape on a ball of radius 2: plateau, C^1 transition, zero tail.
    let profile = make_profile(0.05, 2.0)?;
    for s in [0.0, 1.0, 1.25, 1.5, 1.625, 1.75, 1.9] {
        println!("rho(|x - a| = {s:>5}) = {:.6}", profile.radius_at(s));
    }
    Ok(())
}
