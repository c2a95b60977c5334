//! Builds a GW barycenter of three ellipses and recovers planar coordinates
//! for it with classical MDS.

use lpgw::harness::ellipse_dataset;
use lpgw::reference::{classical_mds, gw_barycenter, BarycenterConfig};
use lpgw::{FwConfig, GaugeKind, GmSpace};

fn main() -> lpgw::Result<()> {
    let data = ellipse_dataset(3, 30, 40, 8)?;
    let mut cfg = BarycenterConfig::new(25);
    cfg.fw = FwConfig::default().with_restarts(2);
    let bary = gw_barycenter(&data.spaces, &cfg)?;
    println!("objective trace: {:?}", bary.objective_trace);

    let coords = classical_mds(bary.space.gauge().view(), 2)?;
    let back = GmSpace::from_points(
        coords.clone(),
        bary.space.mass().clone(),
        GaugeKind::SquaredEuclidean,
    )?;
    let err = (back.gauge() - bary.space.gauge())
        .mapv(f64::abs)
        .fold(0.0_f64, |a, b| a.max(*b));
    println!("largest gauge error of the 2-D realization: {err:.3e}");
    print!("{}", back.to_pointcloud_csv()?);
    Ok(())
}
