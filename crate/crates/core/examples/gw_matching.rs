//! Matches a point cloud against a rotated, shuffled copy of itself with
//! Gromov-Wasserstein and reports how many atoms land on their original.

use lpgw::fw::FwInit;
use lpgw::{solve_gw, FwConfig, GaugeKind, GmSpace};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> lpgw::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 12;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random::<f64>(), rng.random::<f64>() * 0.5])
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (c, s) = (0.8_f64.cos(), 0.8_f64.sin());
    let moved: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| {
            vec![
                c * rows[i][0] - s * rows[i][1] + 3.0,
                s * rows[i][0] + c * rows[i][1],
            ]
        })
        .collect();

    let mass = vec![1.0 / n as f64; n];
    let a = GmSpace::from_rows(&rows, mass.clone(), GaugeKind::SquaredEuclidean)?;
    let b = GmSpace::from_rows(&moved, mass, GaugeKind::SquaredEuclidean)?;
    let cfg = FwConfig::default()
        .with_init(FwInit::Product)
        .with_restarts(8)
        .with_seed(1);
    let (plan, report) = solve_gw(&a, &b, &cfg)?;

    let hits = (0..n)
        .filter(|&i| {
            let j = (0..n)
                .max_by(|&x, &y| plan.matrix[[i, x]].total_cmp(&plan.matrix[[i, y]]))
                .unwrap();
            order[j] == i
        })
        .count();
    println!(
        "GW = {:.3e} after {} iterations",
        report.objective, report.iterations
    );
    println!("{hits}/{n} atoms matched to their rotated copy");
    Ok(())
}
