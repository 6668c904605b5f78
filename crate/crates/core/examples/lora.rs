//! Fit a rank-1 update on top of a frozen linear map.

use cyborg::lora::LoraLinear;
use nalgebra::{DMatrix, DVector};

fn main() -> cyborg::Result<()> {
    let w = DMatrix::from_fn(5, 4, |i, j| ((i * 4 + j) as f64).sin());
    let b = DVector::from_element(5, 0.1);
    let u = DVector::from_vec(vec![1.0, -0.5, 0.25, 0.0, 0.5]);
    let v = DVector::from_vec(vec![0.3, 0.2, -0.4, 0.1]);
    let target = &w + &u * v.transpose();
    let data: Vec<_> = (0..24)
        .map(|k| {
            let x = DVector::from_fn(4, |i, _| ((k * 7 + i * 3) as f64).cos());
            let y = &target * &x + &b;
            (x, y)
        })
        .collect();
    let layer = LoraLinear::new(w, b, 1, 11)?;
    println!("initial loss {:.3e}", layer.loss(&data)?);
    let trained = layer.train(&data, 4000, 0.1)?;
    println!("trained loss {:.3e}, delta rank {}", trained.loss(&data)?, trained.effective_rank());
    Ok(())
}
