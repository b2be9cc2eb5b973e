//! Drives the command-line front end in-process: dataset, training,
//! sampling and complexity check.
//!
//! cargo run --release --example cli_pipeline

fn lformer(args: &[&str]) {
    let mut argv = vec!["lformer"];
    argv.extend_from_slice(args);
    println!("$ {}", argv.join(" "));
    let code = lformer::cli::run(argv, &mut std::io::stdout(), &mut std::io::stderr());
    assert_eq!(code, 0, "command failed");
}

fn main() -> std::io::Result<()> {
    let dir = std::env::temp_dir().join("lformer_cli_pipeline");
    std::fs::create_dir_all(&dir)?;
    let spec = dir.join("spec.toml");
    std::fs::write(
        &spec,
        "h = 4\nk = 8\nn_classes = 2\nn_samples = 32\nkind = \"quadrant\"\nseed = 1\n",
    )?;
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let model = [
        "--h",
        "4",
        "--k",
        "8",
        "--n-classes",
        "2",
        "--layers",
        "1",
        "--dim",
        "32",
        "--latent-dim",
        "4",
    ];
    let (data, ckpt, metrics) = (p("data.lfg"), p("model.ckpt"), p("metrics.csv"));
    lformer(&["gen-data", "--spec", &p("spec.toml"), "--out", &data]);
    let mut train = vec![
        "train",
        "--data",
        &data,
        "--ckpt",
        &ckpt,
        "--metrics",
        &metrics,
        "--epochs",
        "6",
        "--lr",
        "0.003",
    ];
    train.extend_from_slice(&model);
    lformer(&train);
    let out = p("samples.lfg");
    lformer(&[
        "sample", "--ckpt", &ckpt, "--class", "1", "--greedy", "--out", &out, "--print", "--pgm",
    ]);
    lformer(&[
        "inpaint",
        "--ckpt",
        &ckpt,
        "--input",
        &out,
        "--bbox",
        "0,0,16,16",
        "--class",
        "0",
        "--greedy",
        "--print",
    ]);
    lformer(&[
        "verify-complexity",
        "--max-n",
        "1024",
        "--table-n",
        "1024",
        "--dims",
        "1024",
    ]);
    println!("files in {}", dir.display());
    Ok(())
}
