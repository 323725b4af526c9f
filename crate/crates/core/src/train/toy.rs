use rand::Rng;

use crate::data::{Dataset, Split};
use crate::model::{ModelSpec, Variant};
use crate::rng;

/// `n` 4x4 images of two linearly separable classes: class 0 is bright on
/// the left half, class 1 on the right half, with uniform jitter.
pub fn toy_two_class(n: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, "toy");
    let mut images = Vec::with_capacity(n * 16);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = (i % 2) as u8;
        for p in 0..16 {
            let right = p % 4 >= 2;
            let base = if right == (y == 1) { 0.75 } else { 0.25 };
            images.push(base + r.random_range(-0.2f32..0.2));
        }
        labels.push(y);
    }
    Dataset::new("toy", Split::Train, 4, 4, images, labels).expect("toy data is well formed")
}

/// Small architecture for [`toy_two_class`].
pub fn toy_spec(variant: Variant) -> ModelSpec {
    let mut s = ModelSpec::new(variant);
    s.k = 8;
    s.input_dim = 16;
    s.num_classes = 2;
    s.encoder_hidden = vec![32];
    s.decoder_hidden = vec![16];
    if variant == Variant::VibFixed {
        s.fixed_dim = Some(4);
    }
    s
}
