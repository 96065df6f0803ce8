use ndarray::Array1;
use proptest::prelude::*;

use corruptbench_core::datamodel::ImageBuffer;
use corruptbench_core::synth::natural_image;
use tinyclip::{
    encode_image, predict_batch, prompt_embeddings, similarity, zero_shot_predict, EncoderConfig, Prompts,
    VisualEncoder, DEFAULT_TEMPLATE,
};

fn table(dim: usize, classes: usize) -> Prompts {
    let names: Vec<String> = (0..classes).map(|c| format!("class {c}")).collect();
    prompt_embeddings(&names, "test", DEFAULT_TEMPLATE, 5, dim).unwrap()
}

#[test]
fn fresh_adapters_predict_like_the_base() {
    let cfg = EncoderConfig::toy();
    let enc = VisualEncoder::<f32>::seeded(&cfg, 8, 9).unwrap();
    let base = enc.adapter_free();
    let t = table(cfg.embed_dim, 4);
    let imgs: Vec<ImageBuffer<f32>> = (0..200).map(|s| natural_image(32, 32, 1, 1000 + s)).collect();
    let a = predict_batch(&enc, &imgs, &t).unwrap();
    assert_eq!(a, predict_batch(&base, &imgs, &t).unwrap());
    for img in imgs.iter().take(10) {
        assert_eq!(encode_image(&enc, img).unwrap(), encode_image(&base, img).unwrap());
    }
}

#[test]
fn shape_mismatch_is_rejected() {
    let enc = VisualEncoder::<f32>::seeded(&EncoderConfig::toy(), 0, 0).unwrap();
    let img: ImageBuffer<f32> = natural_image(16, 16, 1, 0);
    assert!(encode_image(&enc, &img).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prediction_is_the_first_maximum(seed in 0u64..1000, classes in 2usize..7) {
        let cfg = EncoderConfig::toy();
        let enc = VisualEncoder::<f32>::seeded(&cfg, seed, seed + 1).unwrap();
        let t = table(cfg.embed_dim, classes);
        let img = natural_image(32, 32, 1, seed);
        let f = encode_image(&enc, &img).unwrap();
        let s = similarity(&f, &t).unwrap();
        let mut best = 0;
        for c in 1..classes {
            if s[c] > s[best] {
                best = c;
            }
        }
        prop_assert_eq!(zero_shot_predict(&enc, &img, &t).unwrap(), best);
    }
}

#[test]
fn embedding_equal_to_a_prompt_wins() {
    let t = table(6, 4);
    let f: Array1<f32> = t.vector(2).to_owned();
    let s = similarity(&f, &t).unwrap();
    assert_eq!(
        s.iter().enumerate().fold(0, |b, (i, &v)| if v > s[b] { i } else { b }),
        2
    );
}
