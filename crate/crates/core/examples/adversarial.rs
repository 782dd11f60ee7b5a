//! Trains the frame classifier and the WGAN generator, then draws
//! adversarial negatives for one sequence.

use acot::advgen::{fooling_rates, make_negatives, train_classifier, train_wgan, ClassifierConfig, GanConfig};
use acot::data::{make_synthetic, RngSeed, SyntheticConfig};

fn main() -> acot::Result<()> {
    let seed = RngSeed(7);
    let ds = make_synthetic(&SyntheticConfig::default(), seed)?;
    let clf = train_classifier(&ds, &ClassifierConfig::default(), seed.child(1))?;
    println!("classifier train accuracy {:.3}", clf.train_accuracy);

    let cfg = GanConfig {
        iters: 500,
        eval_every: 100,
        ..GanConfig::default()
    };
    let gan = train_wgan(&ds, &clf.params, &cfg, seed.child(2))?;
    for h in &gan.history {
        println!(
            "iter {:>4}  loose {:.3}  strict {:.3}  |x'|^2 {:.4}",
            h.iter, h.loose_fooling, h.strict_fooling, h.mean_perturbation_sq
        );
    }
    let rates = fooling_rates(&gan.generator, &clf.params, &ds, cfg.sigma, seed.child(3))?;
    println!("held-out draw loose {:.3}", rates.loose);

    let x = &ds.sequences()[0];
    let y = make_negatives(&gan.generator, x, 2 * x.len(), cfg.sigma, seed.child(4))?;
    println!("{} negatives of dimension {} for {}", y.samples().ncols(), y.samples().nrows(), x.id());
    Ok(())
}
