//! Partial GW between a shape and a noisy copy: as the mass penalty grows,
//! more mass is forced through the plan and the outliers get matched too.

use lpgw::harness::{corrupt_with_noise, disk_ring_dataset};
use lpgw::{solve_gw, solve_pgw, FwConfig};

fn main() -> lpgw::Result<()> {
    let ring = disk_ring_dataset(1, 60, 60, 3)?.spaces.remove(1);
    let noisy = corrupt_with_noise(&ring, 0.3, 5)?;
    let cfg = FwConfig::default().with_restarts(4);

    println!(
        "|mu| = {}, |nu| = {:.3}",
        ring.total_mass(),
        noisy.total_mass()
    );
    println!("{:>8} {:>12} {:>12}", "lambda", "PGW", "transported");
    for lambda in [0.01, 0.05, 0.1, 0.5, 2.0] {
        let (plan, report) = solve_pgw(&ring, &noisy, lambda, &cfg)?;
        println!(
            "{lambda:>8} {:>12.5} {:>12.4}",
            report.objective,
            plan.total()
        );
    }
    let (_, gw) = solve_gw(&ring, &ring, &cfg)?;
    println!("GW of the clean ring with itself: {:.2e}", gw.objective);
    Ok(())
}
