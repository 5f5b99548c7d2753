//! Conv throughput probe: single layer and full desk-scale trunk.
use proclone_core::nn::ops::Conv2d;
use proclone_core::nn::{init, Parameter, Tensor};
use proclone_core::Rng;
use std::time::Instant;

fn conv(rng: &mut Rng, cin: usize, cout: usize) -> Conv2d {
    Conv2d {
        weight: Parameter::new("w", init::kaiming_uniform(rng, &[cout, cin, 3, 3], cin * 9)),
        bias: Parameter::new("b", Tensor::zeros(&[cout])),
    }
}

fn main() {
    let mut rng = Rng::new(0);
    let (h, w) = (17, 17);
    // Single conv layer on a (12,17,17) input.
    let mut layer = conv(&mut rng, 12, 32);
    let x = Tensor::from_vec(&[1, 12, h, w], (0..12 * h * w).map(|i| (i % 7) as f32 * 0.1).collect());
    let iters = 2000;
    let t0 = Instant::now();
    let mut sink = 0.0f32;
    for _ in 0..iters {
        let y = layer.forward(&x);
        let dx = layer.backward(&x, &y);
        sink += dx.data()[0];
    }
    let dt = t0.elapsed().as_secs_f64() / iters as f64;
    println!("single conv 12->32 fwd+bwd: {:.3} ms (sink {sink})", dt * 1e3);

    // Full desk trunk 12->(32,32,64,64,64)->9, batch 1 and batch 32.
    let chans = [12usize, 32, 32, 64, 64, 64];
    let mut layers: Vec<Conv2d> = chans.windows(2).map(|p| conv(&mut rng, p[0], p[1])).collect();
    let mut head = conv(&mut rng, 64, 9);
    for &batch in &[1usize, 32] {
        let x = Tensor::from_vec(&[batch, 12, h, w], vec![0.3; batch * 12 * h * w]);
        let iters = if batch == 1 { 200 } else { 12 };
        let t0 = Instant::now();
        for _ in 0..iters {
            let mut acts = vec![x.clone()];
            for l in &layers {
                let y = l.forward(acts.last().unwrap());
                acts.push(proclone_core::nn::ops::relu(&y));
            }
            let y = head.forward(acts.last().unwrap());
            // backward with dy = y
            let mut dy = head.backward(acts.last().unwrap(), &y);
            for (i, l) in layers.iter_mut().enumerate().rev() {
                let dz = proclone_core::nn::ops::relu_backward(&acts[i + 1], &dy);
                dy = l.backward(&acts[i], &dz);
            }
        }
        let dt = t0.elapsed().as_secs_f64() / iters as f64;
        let macs_fwd = {
            let hw = (h * w) as f64;
            let mut m = 0.0;
            for p in chans.windows(2) { m += p[0] as f64 * p[1] as f64 * 9.0 * hw; }
            m += 64.0 * 9.0 * 9.0 * hw;
            m * batch as f64
        };
        println!(
            "trunk batch {batch}: fwd+bwd {:.2} ms  (~{:.1} GMAC/s est. at 3x fwd macs)",
            dt * 1e3,
            3.0 * macs_fwd / dt / 1e9
        );
    }
}
