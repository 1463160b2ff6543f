//! Layer outputs and gradients checked against independent brute-force
//! references written without any of the engine's indexing helpers.

use tapkit_core::nn::toy::{ConvToy, DenseToy, DropoutToy, EmbeddingToy};
use tapkit_core::nn::{
    conv_forward, dense_forward, embedding_backward, gradient_check, maxpool_backward, maxpool_forward,
    GradientCheckable, LayerGrads, LayerParams, Tensor,
};
use tapkit_core::RngStream;

fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    Tensor::uniform(shape, 1.0, &mut RngStream::new(seed))
}

/// Direct summation with explicit zero padding.
fn conv_oracle(x: &[Vec<Vec<f64>>], w: &[Vec<Vec<Vec<f64>>>], b: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let (h, wd, cin, cout) = (x.len(), x[0].len(), x[0][0].len(), b.len());
    let mut padded = vec![vec![vec![0.0; cin]; wd + 2]; h + 2];
    for i in 0..h {
        for j in 0..wd {
            padded[i + 1][j + 1] = x[i][j].clone();
        }
    }
    let mut out = vec![vec![vec![0.0; cout]; wd]; h];
    for i in 0..h {
        for j in 0..wd {
            for f in 0..cout {
                let mut s = b[f];
                for di in 0..3 {
                    for dj in 0..3 {
                        for c in 0..cin {
                            s += padded[i + di][j + dj][c] * w[di][dj][c][f];
                        }
                    }
                }
                out[i][j][f] = s;
            }
        }
    }
    out
}

#[test]
fn conv_matches_direct_summation() {
    let (h, w, cin, cout) = (5, 5, 2, 3);
    let input = random_tensor(&[h, w, cin], 11);
    let mut rng = RngStream::new(12);
    let mut params = LayerParams::<f64>::conv3x3(cin, cout, &mut rng);
    params.bias = Some(Tensor::uniform(&[cout], 1.0, &mut rng));

    let x: Vec<Vec<Vec<f64>>> = (0..h)
        .map(|i| (0..w).map(|j| (0..cin).map(|c| input.data()[(i * w + j) * cin + c]).collect()).collect())
        .collect();
    let wt = params.weights.data();
    let k: Vec<Vec<Vec<Vec<f64>>>> = (0..3)
        .map(|a| {
            (0..3)
                .map(|bb| (0..cin).map(|c| (0..cout).map(|f| wt[((a * 3 + bb) * cin + c) * cout + f]).collect()).collect())
                .collect()
        })
        .collect();
    let expected = conv_oracle(&x, &k, params.bias.as_ref().unwrap().data());
    let got = conv_forward(&input, &params).unwrap();
    for i in 0..h {
        for j in 0..w {
            for f in 0..cout {
                let g = got.data()[(i * w + j) * cout + f];
                assert!((g - expected[i][j][f]).abs() < 1e-12, "({i},{j},{f}) {g} vs {}", expected[i][j][f]);
            }
        }
    }
}

#[test]
fn maxpool_matches_blockwise_max() {
    let (h, w, c) = (6, 4, 3);
    let input = random_tensor(&[h, w, c], 21);
    let (out, _) = maxpool_forward(&input).unwrap();
    assert_eq!(out.shape(), &[3, 2, 3]);
    let at = |i: usize, j: usize, ch: usize| input.data()[(i * w + j) * c + ch];
    for i in 0..3 {
        for j in 0..2 {
            for ch in 0..c {
                let m = [at(2 * i, 2 * j, ch), at(2 * i, 2 * j + 1, ch), at(2 * i + 1, 2 * j, ch), at(2 * i + 1, 2 * j + 1, ch)]
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(out.data()[(i * 2 + j) * c + ch], m);
            }
        }
    }
}

#[test]
fn maxpool_backward_routes_one_cell_per_block() {
    let input = random_tensor(&[7, 5, 2], 31);
    let (out, idx) = maxpool_forward(&input).unwrap();
    let upstream = random_tensor(out.shape(), 32);
    let grad = maxpool_backward(&upstream, &idx).unwrap();
    let routed: f64 = grad.data().iter().sum();
    let total: f64 = upstream.data().iter().sum();
    assert!((routed - total).abs() < 1e-12);
    assert_eq!(grad.data().iter().filter(|&&g| g != 0.0).count(), upstream.len());
}

#[test]
fn dense_matches_matvec() {
    let mut rng = RngStream::new(41);
    let mut params = LayerParams::<f64>::dense(7, 3, &mut rng);
    params.bias = Some(Tensor::uniform(&[3], 1.0, &mut rng));
    let x = random_tensor(&[7], 42);
    let got = dense_forward(x.data(), &params).unwrap();
    for j in 0..3 {
        let mut s = params.bias.as_ref().unwrap().data()[j];
        for i in 0..7 {
            s += x.data()[i] * params.weights.data()[i * 3 + j];
        }
        assert!((got[j] - s).abs() < 1e-12);
    }
}

#[test]
fn embedding_gradient_is_row_mask() {
    // d(sum of output)/d(table) by finite differences is 1 on the looked-up row.
    let mut rng = RngStream::new(51);
    let mut table = LayerParams::<f64>::embedding(4, 3, &mut rng);
    let index = 2;
    let mut grads = LayerGrads::zeros_like(&table);
    embedding_backward(index, &[1.0; 3], &mut grads).unwrap();
    let h = 1e-6;
    for p in 0..table.weights.len() {
        let orig = table.weights.data()[p];
        table.weights.data_mut()[p] = orig + h;
        let plus: f64 = tapkit_core::nn::embedding_forward(index, &table).unwrap().iter().sum();
        table.weights.data_mut()[p] = orig - h;
        let minus: f64 = tapkit_core::nn::embedding_forward(index, &table).unwrap().iter().sum();
        table.weights.data_mut()[p] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        assert!((numeric - grads.weights.data()[p]).abs() < 1e-8);
        let expected = if p / 3 == index { 1.0 } else { 0.0 };
        assert_eq!(grads.weights.data()[p], expected);
    }
}

#[test]
fn gradient_checks_per_layer_kind() {
    let mut dense = DenseToy::new(6, 5, 1);
    let x = random_tensor(&[6], 2).into_data();
    let r = gradient_check(&mut dense, &x, 1);
    assert!(r.max_relative_error < 1e-6, "dense {:?}", r);

    let mut conv = ConvToy::new([8, 6, 2], 3, 3);
    let img = random_tensor(&[8, 6, 2], 4);
    let r = gradient_check(&mut conv, &img, 0);
    assert!(r.max_relative_error < 1e-4, "conv {:?}", r);

    let mut emb = EmbeddingToy::new(5, 4, 5);
    let r = gradient_check(&mut emb, &3, 1);
    assert!(r.max_relative_error < 1e-6, "embedding {:?}", r);

    let mut drop = DropoutToy::new(6, 8, Some(0.4), 6);
    let r = gradient_check(&mut drop, &x, 0);
    assert!(r.max_relative_error < 1e-6, "dropout mask {:?}", r);

    let mut no_drop = DropoutToy::new(6, 8, None, 6);
    assert!(gradient_check(&mut no_drop, &x, 0).max_relative_error < 1e-6);
    assert_eq!(no_drop.param_tensor_count(), 4);
}
