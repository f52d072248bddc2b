#![allow(dead_code)]

use motran_core::models::{ModelBundle, ModelConfig};
use motran_core::nn::Tensor;
use motran_core::DomainTag;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tag(s: &str) -> DomainTag {
    DomainTag::new(s).unwrap()
}

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        n: 8,
        d_z: 4,
        enc_hidden: 3,
        gen_hidden: 2,
        pred_hidden: 3,
        disc_channels: 3,
        disc_hidden: 2,
    }
}

pub fn tiny_bundle(seed: u64) -> ModelBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ModelBundle::init(tiny_config(), &[tag("src"), tag("tgt")], &mut rng).unwrap();
    // Zero-initialized biases would leave their gradient paths untested.
    let names: Vec<String> = b.sets().into_iter().map(|(n, _)| n).collect();
    for set in names {
        let p = b.set_mut(&set).unwrap();
        let keys: Vec<String> = p.names().filter(|k| k.ends_with(".b") || k.contains(".b_")).cloned().collect();
        for k in keys {
            for v in p.get_mut(&k).unwrap().data_mut() {
                *v = rng.random_range(-0.3..0.3);
            }
        }
    }
    b
}

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}
