//! Criterion benchmarks for the convolution kernels and model inference.
//! Run with `cargo bench -p tapkit-bench`.
