//! Embeds three shapes against one reference and compares the linearized
//! distances with direct PGW solves.
//!
//! The value recovered from an embedding equals the PGW objective only when
//! the optimal plan is induced by a map; otherwise the two differ.

use lpgw::harness::ellipse_dataset;
use lpgw::linearize::{alpgw_distance, embed_lpgw, recover_pgw_from_embedding, Reference};
use lpgw::{solve_pgw, FwConfig};

fn main() -> lpgw::Result<()> {
    let mut data = ellipse_dataset(4, 30, 40, 21)?;
    let reference = Reference::new(data.ids.remove(0), data.spaces.remove(0));
    let lambda = 0.2;
    let cfg = FwConfig::default().with_restarts(4);

    let emb = data
        .spaces
        .iter()
        .map(|s| embed_lpgw(&reference, s, lambda, &cfg))
        .collect::<lpgw::Result<Vec<_>>>()?;
    for ((id, e), target) in data.ids.iter().zip(&emb).zip(&data.spaces) {
        let (_, direct) = solve_pgw(&reference.space, target, lambda, &cfg)?;
        println!(
            "{id}: PGW(ref, Y) = {:.5}, from embedding = {:.5}",
            direct.objective,
            recover_pgw_from_embedding(e, reference.space.total_mass())
        );
    }
    println!("\npair          PGW      aLPGW");
    for i in 0..emb.len() {
        for j in i + 1..emb.len() {
            let (_, exact) = solve_pgw(&data.spaces[i], &data.spaces[j], lambda, &cfg)?;
            println!(
                "{} {} {:.5} {:.5}",
                &data.ids[i][8..],
                &data.ids[j][8..],
                exact.objective,
                alpgw_distance(&emb[i], &emb[j])?
            );
        }
    }
    Ok(())
}
