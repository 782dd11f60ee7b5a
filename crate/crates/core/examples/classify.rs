//! Compares the three classification pipelines on one train/test split.

use acot::advgen::random_negatives;
use acot::classify::{evaluate, ClassifyConfig, Pipeline};
use acot::data::{make_synthetic, Dataset, RngSeed, SyntheticConfig};
use acot::representation::{learn_representations, pool_sequence, AcotConfig, Pooled};

fn pooled(ds: &Dataset, seed: RngSeed, pipeline: Pipeline) -> acot::Result<Vec<(Pooled, usize)>> {
    let negatives = ds
        .sequences()
        .iter()
        .enumerate()
        .map(|(i, x)| random_negatives(x, 2 * x.len(), seed.child(i as u64)))
        .collect::<acot::Result<Vec<_>>>()?;
    let out = learn_representations(ds.sequences(), &negatives, &AcotConfig::default())?;
    ds.sequences()
        .iter()
        .zip(&out)
        .map(|(x, o)| Ok((pool_sequence(x, &o.subspace, pipeline.pool_mode())?, x.label())))
        .collect()
}

fn main() -> acot::Result<()> {
    let ds = make_synthetic(&SyntheticConfig::default(), RngSeed(5))?;
    let (train, test) = ds.split(0.25, RngSeed(6))?;
    for pipeline in [Pipeline::AvgpoolRaw, Pipeline::AcotSubspaceKnn, Pipeline::AcotAvgpoolLinear] {
        let cfg = ClassifyConfig {
            pipeline,
            ..ClassifyConfig::default()
        };
        let eval = evaluate(
            &cfg,
            &pooled(&train, RngSeed(7), pipeline)?,
            &pooled(&test, RngSeed(8), pipeline)?,
            ds.num_classes(),
        )?;
        println!("{:<22} accuracy {:.3}", pipeline.name(), eval.accuracy);
    }
    Ok(())
}
