//! Full comparison on a synthetic ellipse set: PGW for every pair against
//! aLPGW with a barycenter reference, with timings, MRE and PCC.

use lpgw::harness::{
    ellipse_dataset, eval_mre_pcc, pairwise, Method, PairwiseConfig, DEFAULT_FLOOR,
};
use lpgw::linearize::Reference;
use lpgw::reference::{gw_barycenter, BarycenterConfig};

fn main() -> lpgw::Result<()> {
    let data = ellipse_dataset(20, 40, 80, 2024)?;
    let lambda = 0.1;
    let cfg = PairwiseConfig::default();

    let picks: Vec<_> = data
        .one_per_label()
        .into_iter()
        .map(|i| data.spaces[i].clone())
        .collect();
    let bary = gw_barycenter(&picks, &BarycenterConfig::new(60))?;
    let reference = Reference::new("barycenter", bary.space);

    let exact = pairwise(&data, Method::Pgw, Some(lambda), None, &cfg)?;
    let approx = pairwise(&data, Method::Alpgw, Some(lambda), Some(&reference), &cfg)?;
    let report = eval_mre_pcc(&exact, &approx, DEFAULT_FLOOR)?;

    for dm in [&exact, &approx] {
        println!(
            "{:>6}: {:>4} solver calls, {:.2}s",
            dm.method, dm.solver_calls, dm.wall_clock_seconds
        );
    }
    println!(
        "speedup {:.1}x",
        exact.wall_clock_seconds / approx.wall_clock_seconds
    );
    println!("MRE {:.4}  PCC {:.4}", report.mre, report.pcc);
    Ok(())
}
