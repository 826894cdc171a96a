//! PCGrad, MGDA and GradNorm on a pair of conflicting gradients.

use graddrop::combine::{
    gradnorm_step, mgda_minnorm, naive_sum, pcgrad, GradNormConfig, MgdaConfig, TaskGradients,
};
use graddrop::ndcore::{RngStream, Tensor};

fn main() -> graddrop::Result<()> {
    let tg = TaskGradients::new(vec![
        Tensor::from_vec(vec![1.0, 1.0]),
        Tensor::from_vec(vec![-1.0, 0.5]),
    ])?;
    let mut rng = RngStream::new(0, 0);

    println!("naive sum        {:?}", naive_sum(&tg).data());
    println!("pcgrad           {:?}", pcgrad(&tg, &mut rng, false)?.data());
    println!("pcgrad iterative {:?}", pcgrad(&tg, &mut rng, true)?.data());

    let sol = mgda_minnorm(&tg, MgdaConfig::default())?;
    println!(
        "mgda             {:?} (weights {:?}, gap {:.1e}, {} iterations)",
        sol.combined.data(),
        sol.weights,
        sol.gap,
        sol.iterations
    );

    let norms: Vec<f64> = tg.grads().iter().map(Tensor::l2_norm).collect();
    let mut weights = vec![1.0, 1.0];
    for _ in 0..5 {
        weights = gradnorm_step(&weights, &[0.5, 0.9], &norms, &[1.0, 1.0], GradNormConfig::default())?;
    }
    println!("gradnorm weights {weights:?}");
    Ok(())
}
