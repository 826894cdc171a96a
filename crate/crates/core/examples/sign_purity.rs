//! Sign purity, masks and the GradDrop update on a small hand-made batch.

use graddrop::combine::{activation, graddrop, naive_sum, purity, GradDropConfig, TaskGradients};
use graddrop::ndcore::{RngStream, Tensor};

fn main() -> graddrop::Result<()> {
    // three tasks, four positions; position 2 is all-positive, 3 is a tie
    let grads = vec![
        Tensor::new(vec![4], vec![1.0, -2.0, 0.5, 1.0])?,
        Tensor::new(vec![4], vec![-3.0, -1.0, 2.0, -1.0])?,
        Tensor::new(vec![4], vec![1.0, 0.5, 0.0, 0.0])?,
    ];
    let tg = TaskGradients::new(grads)?;

    let p = purity(tg.grads())?;
    println!("purity          {:?}", p.data());
    println!("keep-positive   {:?}", activation(&p, 1.0)?.data());
    println!("naive sum       {:?}", naive_sum(&tg).data());

    let cfg = GradDropConfig::new(3).with_marginalize(false);
    let mut rng = RngStream::new(7, 0);
    for draw in 0..3 {
        let (out, masks) = graddrop(&tg, &cfg, &mut rng)?;
        println!("draw {draw}: update {:?}, keep fraction {:.3}", out.data(), masks.keep_fraction);
    }

    let leaky = cfg.clone().with_leaks(vec![1.0, 0.0, 0.0]);
    let (out, _) = graddrop(&tg, &leaky, &mut rng)?;
    println!("task 0 fully leaked: {:?}", out.data());
    Ok(())
}
