//! Raw kernel throughput on the dominant conv shapes.
use proclone_core::nn::kernels::{gemm_nn, gemm_nt, gemm_tn};
use std::time::Instant;

fn bench(name: &str, mut f: impl FnMut(), macs: f64, iters: usize) {
    let t0 = Instant::now();
    for _ in 0..iters { f(); }
    let dt = t0.elapsed().as_secs_f64() / iters as f64;
    println!("{name}: {:.3} ms  {:.1} GMAC/s", dt * 1e3, macs / dt / 1e9);
}

fn main() {
    let (m, k, n) = (64usize, 576usize, 289usize);
    let a = vec![0.5f32; m * k];
    let b = vec![0.25f32; k * n];
    let mut c = vec![0.0f32; m * n];
    let macs = (m * k * n) as f64;
    bench("gemm_nn 64x576x289", || gemm_nn(&mut c, &a, &b, m, k, n), macs, 200);
    // dW shape: (64 x 576) += (64 x 289) . (576 x 289)^T
    let dy = vec![0.5f32; m * n];
    let cols = vec![0.25f32; k * n];
    let mut dw = vec![0.0f32; m * k];
    bench("gemm_nt 64x289x576", || gemm_nt(&mut dw, &dy, &cols, m, n, k), macs, 200);
    // dcols: (576 x 289) += W^T(64x576) . dY(64x289)
    let mut dcols = vec![0.0f32; k * n];
    bench("gemm_tn 576x289 b=64", || gemm_tn(&mut dcols, &a, &dy, m, k, n), macs, 200);
}
