use lformer::corpus::{
    generate, load_grids, quadrant_ids, save_grids, DatasetSpec, GeneratorKind, GridFile,
};
use lformer::net::{load_ckpt, save_ckpt, Checkpoint};
use lformer::Error;

mod common;

fn spec(kind: GeneratorKind, noise_rate: f64, n_samples: usize) -> DatasetSpec {
    DatasetSpec {
        h: 8,
        k: 16,
        n_classes: 4,
        n_samples,
        kind,
        noise_rate,
        seed: 3,
    }
}

#[test]
fn constant_noise_rate_within_binomial_interval() {
    let data = generate(&spec(GeneratorKind::Constant, 0.1, 1000)).unwrap();
    let flipped: usize = data
        .iter()
        .map(|ex| {
            ex.grid
                .tokens()
                .iter()
                .filter(|&&t| t as usize != ex.class % 16)
                .count()
        })
        .sum();
    // Binomial(64000, 0.1): mean 6400, sd sqrt(5760); two-sided 99% z = 2.5758
    let n = 64_000.0f64;
    let half_width = 2.5758 * (n * 0.1 * 0.9).sqrt();
    assert!(
        (flipped as f64 - 6400.0).abs() <= half_width,
        "{flipped} flips"
    );
    let per_grid = flipped as f64 / 1000.0;
    assert!((per_grid - 6.4).abs() <= half_width / 1000.0);
}

#[test]
fn noise_free_generators() {
    let data = generate(&spec(GeneratorKind::Constant, 0.0, 8)).unwrap();
    assert!(data[3].grid.tokens().iter().all(|&t| t == 3));
    let data = generate(&spec(GeneratorKind::Quadrant, 0.0, 4)).unwrap();
    for ex in &data {
        let ids = quadrant_ids(ex.class, 4, 16);
        assert_eq!(ex.grid.get(0, 0), ids[0]);
        assert_eq!(ex.grid.get(0, 7), ids[1]);
        assert_eq!(ex.grid.get(7, 0), ids[2]);
        assert_eq!(ex.grid.get(7, 7), ids[3]);
    }
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for (i, kind) in [
        GeneratorKind::Constant,
        GeneratorKind::Quadrant,
        GeneratorKind::Markov,
    ]
    .into_iter()
    .enumerate()
    {
        let s = spec(kind, 0.2, 20);
        let a = dir.path().join(format!("a{i}"));
        let b = dir.path().join(format!("b{i}"));
        save_grids(&a, &GridFile::from_examples(16, &generate(&s).unwrap())).unwrap();
        save_grids(&b, &GridFile::from_examples(16, &generate(&s).unwrap())).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}

#[test]
fn grid_and_checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&spec(GeneratorKind::Markov, 0.1, 30)).unwrap();
    let file = GridFile::from_examples(16, &data);
    let p = dir.path().join("grids");
    save_grids(&p, &file).unwrap();
    assert_eq!(load_grids(&p).unwrap(), file);

    let net = common::random_net(4, 1);
    let c = dir.path().join("ckpt");
    save_ckpt(
        &c,
        &Checkpoint {
            net: net.clone(),
            train: None,
        },
    )
    .unwrap();
    let back = load_ckpt(&c).unwrap().net;
    assert_eq!(back.config(), net.config());
    for ((na, a), (nb, b)) in net.params.tensors().into_iter().zip(back.params.tensors()) {
        assert_eq!(na, nb);
        assert_eq!(a, b);
    }
}

#[test]
fn damaged_files_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&spec(GeneratorKind::Constant, 0.0, 3)).unwrap();
    let p = dir.path().join("grids");
    save_grids(&p, &GridFile::from_examples(16, &data)).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    let cut = dir.path().join("cut");
    for len in [0, 4, 12, bytes.len() - 1] {
        std::fs::write(&cut, &bytes[..len]).unwrap();
        assert!(
            matches!(load_grids(&cut), Err(Error::Corrupt { .. })),
            "len {len}"
        );
    }
    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    std::fs::write(&cut, &bad).unwrap();
    assert!(matches!(load_grids(&cut), Err(Error::Corrupt { .. })));
    assert!(matches!(load_ckpt(&cut), Err(Error::Corrupt { .. })));

    let c = dir.path().join("ckpt");
    save_ckpt(
        &c,
        &Checkpoint {
            net: common::random_net(2, 0),
            train: None,
        },
    )
    .unwrap();
    let ck = std::fs::read(&c).unwrap();
    std::fs::write(&cut, &ck[..ck.len() / 2]).unwrap();
    assert!(matches!(load_ckpt(&cut), Err(Error::Corrupt { .. })));

    let mut huge = bytes[..8].to_vec();
    for v in [1u32, u32::MAX, 16, u32::MAX] {
        huge.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&cut, &huge).unwrap();
    assert!(matches!(load_grids(&cut), Err(Error::Corrupt { .. })));
}

#[test]
fn large_grid_small_model_checkpoint_loads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = lformer::net::ModelConfig {
        h: 64,
        layers: 1,
        dim: 8,
        heads: 2,
        latent_dim: 2,
        n_cond: 1,
        ..lformer::net::ModelConfig::default()
    };
    let net = lformer::net::Network::init(&cfg, 0).unwrap();
    let c = dir.path().join("big.ckpt");
    save_ckpt(&c, &Checkpoint { net, train: None }).unwrap();
    assert_eq!(load_ckpt(&c).unwrap().net.config().h, 64);
}

mod fuzz {
    use super::*;
    use proptest::prelude::*;

    fn valid_files() -> (Vec<u8>, Vec<u8>) {
        let dir = tempfile::tempdir().unwrap();
        let g = dir.path().join("g");
        let data = generate(&spec(GeneratorKind::Markov, 0.1, 3)).unwrap();
        save_grids(&g, &GridFile::from_examples(16, &data)).unwrap();
        let c = dir.path().join("c");
        let net = common::random_net(2, 0);
        let tr = lformer::net::Trainer::new(net, Default::default()).unwrap();
        save_ckpt(&c, &Checkpoint::from_trainer(&tr)).unwrap();
        (std::fs::read(g).unwrap(), std::fs::read(c).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn damaged_bytes_never_panic(
            flips in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..6),
            cut in any::<prop::sample::Index>(),
        ) {
            let (grids, ckpt) = valid_files();
            let dir = tempfile::tempdir().unwrap();
            for (i, original) in [grids, ckpt].into_iter().enumerate() {
                let mut bytes = original.clone();
                for (idx, v) in &flips {
                    let j = idx.index(bytes.len());
                    bytes[j] = *v;
                }
                let p = dir.path().join(format!("f{i}"));
                std::fs::write(&p, &bytes).unwrap();
                let _ = load_grids(&p);
                let _ = load_ckpt(&p);
                std::fs::write(&p, &original[..cut.index(original.len())]).unwrap();
                prop_assert!(load_grids(&p).is_err());
                prop_assert!(load_ckpt(&p).is_err());
            }
        }
    }
}
