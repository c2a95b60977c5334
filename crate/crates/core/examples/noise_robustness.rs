//! Disks versus rings: 1-NN classification of noisy test shapes against
//! clean training shapes, with aLGW and aLPGW distances.

use lpgw::harness::{
    corrupt_with_noise, disk_ring_dataset, nearest_neighbor_accuracy, pairwise, Method,
    PairwiseConfig,
};
use lpgw::linearize::Reference;
use lpgw::reference::{gw_barycenter, BarycenterConfig};

fn main() -> lpgw::Result<()> {
    let seed = 17;
    let train = disk_ring_dataset(10, 40, 60, seed)?;
    let test = disk_ring_dataset(10, 40, 60, seed + 1)?;

    let mut all = train.clone();
    for (k, ((id, label), s)) in test
        .ids
        .iter()
        .zip(&test.labels)
        .zip(&test.spaces)
        .enumerate()
    {
        all.push(
            format!("noisy_{id}"),
            label.clone(),
            corrupt_with_noise(s, 0.3, seed + k as u64)?,
        );
    }
    let train_idx: Vec<usize> = (0..train.len()).collect();
    let test_idx: Vec<usize> = (train.len()..all.len()).collect();

    let picks: Vec<_> = train
        .one_per_label()
        .into_iter()
        .map(|i| train.spaces[i].clone())
        .collect();
    let reference = Reference::new(
        "barycenter",
        gw_barycenter(&picks, &BarycenterConfig::new(50))?.space,
    );

    let cfg = PairwiseConfig::default();
    // aLGW needs equal masses, so the noisy shapes are renormalized for it
    let mut balanced = all.clone();
    for s in balanced.spaces.iter_mut() {
        *s = s.normalize_mass(1.0)?;
    }
    let lgw = pairwise(&balanced, Method::Algw, None, Some(&reference), &cfg)?;
    let lpgw = pairwise(&all, Method::Alpgw, Some(0.1), Some(&reference), &cfg)?;
    for dm in [&lgw, &lpgw] {
        let acc = nearest_neighbor_accuracy(dm, &all.labels, &train_idx, &test_idx)?;
        println!("{:>6} 1-NN accuracy on noisy shapes: {acc:.2}", dm.method);
    }
    Ok(())
}
