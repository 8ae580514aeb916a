//! Temporary training diagnostics (run with --nocapture).

use proofmatch_core::encoder::{EncoderConfig, EncoderModel, Gradients};
use proofmatch_core::rng::Xoshiro256;
use proofmatch_core::training::{local_loss, local_loss_from_scores};

fn synth_batch(
    rng: &mut Xoshiro256,
    n: usize,
    vocab: u32,
    overlap: f64,
) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let regular = vocab - 2;
    let half = regular / 2;
    let mut statements = Vec::new();
    let mut proofs = Vec::new();
    for _ in 0..n {
        let s_len = 21 + rng.below(7);
        let s: Vec<u32> = (0..s_len).map(|_| 2 + rng.below(half as u64) as u32).collect();
        let p_len = 22 + rng.below(11);
        let p: Vec<u32> = (0..p_len)
            .map(|_| {
                if rng.next_f64() < overlap {
                    s[rng.below(s.len() as u64) as usize]
                } else {
                    2 + half + rng.below((regular - half) as u64) as u32
                }
            })
            .collect();
        statements.push(s);
        proofs.push(p);
    }
    (statements, proofs)
}

#[test]
#[ignore]
fn diagnose_learning() {
    let config = EncoderConfig {
        embed_dim: 64,
        layers: 2,
        model_dim: 64,
        heads: 4,
        key_dim: 16,
        ffn_dim: 128,
        max_len: 64,
    };
    let vocab = 512u32;
    let model = EncoderModel::new(config.clone(), vocab as usize, 42).unwrap();
    let mut rng = Xoshiro256::from_seed(7);

    let (s, p) = synth_batch(&mut rng, 20, vocab, 0.5);
    let fwd = model.score_all_with_trace(&s, &p).unwrap();
    let vals = fwd.matrix.values();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64).sqrt();
    println!("init scores: mean {mean:.4} sd {sd:.4}");

    // Pooled vector geometry: cosine between proof vectors.
    let cos = |a: &[f64], b: &[f64]| {
        let d = proofmatch_core::linalg::dot(a, b);
        let na = proofmatch_core::linalg::dot(a, a).sqrt();
        let nb = proofmatch_core::linalg::dot(b, b).sqrt();
        d / (na * nb)
    };
    let mut cos_sum = 0.0;
    let mut count = 0;
    for i in 0..20 {
        for j in (i + 1)..20 {
            cos_sum += cos(fwd.proof_vector(i), fwd.proof_vector(j));
            count += 1;
        }
    }
    println!("mean proof-proof cosine at init: {:.4}", cos_sum / count as f64);

    let (loss, upstream) = local_loss_from_scores(&fwd.matrix);
    println!("init loss: {loss:.4} (uniform would be {:.4})", 20.0 * (20.0f64).ln());
    let mut grads = Gradients::zeros_like(&model);
    model.backward_scores(&fwd, &upstream, &mut grads);
    for spec in model.layout().to_vec() {
        let g = model.grad_tensor(&grads, &spec.name);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pnorm = model.tensor(&spec.name).iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("{:<24} |g| = {norm:10.4}  |p| = {pnorm:10.4}", spec.name);
    }

    // Take SGD steps and watch the in-batch loss on fresh batches.
    for lr in [0.0003, 0.001, 0.003, 0.01] {
        let mut model = EncoderModel::new(config.clone(), vocab as usize, 42).unwrap();
        let mut rng = Xoshiro256::from_seed(7);
        println!("--- lr {lr}");
        for step in 0..3000 {
            let (s, p) = synth_batch(&mut rng, 20, vocab, 0.5);
            let mut grads = Gradients::zeros_like(&model);
            let loss = local_loss(&model, &s, &p, &mut grads).unwrap();
            for (param, g) in model.params_mut().iter_mut().zip(grads.values()) {
                *param -= lr * g;
            }
            if step % 250 == 0 || step == 2999 {
                println!("step {step:4}: batch loss {loss:.4}");
            }
        }
    }
}
