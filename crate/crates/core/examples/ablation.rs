//! The ablation table plus a small k sweep on the synthetic fixture.

use acot::experiment::{ablate, Settings};

fn main() -> acot::Result<()> {
    let settings = Settings::new().with("seed", 7).with("k_sweep", "1,2,3");
    let report = ablate(&settings)?;
    for (split, acc) in &report.classifier_train_accuracy {
        println!("{split}: classifier train accuracy {acc:.3}");
    }
    for r in &report.records {
        let k = r.k.map_or("-".to_string(), |k| k.to_string());
        match r.accuracy_std {
            Some(std) => println!("{:<6} {:<28} {:.3} ± {:.3}  k={k}", r.kind, r.variant, r.accuracy, std),
            None => println!("{:<6} {:<28} {:.3}  k={k}", r.kind, r.variant, r.accuracy),
        }
    }
    Ok(())
}
