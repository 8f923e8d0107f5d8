use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use wlrd::image::{gen_mask, read_image, read_mask, write_image, write_mask, MaskRecipe};
use wlrd::synthetic;

fn wlrd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wlrd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fields(out: &Output) -> HashMap<String, String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn genmask_writes_the_requested_missing_count() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = path(dir.path(), "mask.png");
    let out = wlrd(&[
        "genmask",
        "--kind",
        "random_pixels",
        "--rate",
        "0.25",
        "--seed",
        "3",
        "--size",
        "16x20",
        &out_path,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let f = fields(&out);
    assert_eq!(f["missing"], "80");
    assert_eq!(f["kind"], "random_pixels");
    let mask = read_mask(&out_path).unwrap();
    assert_eq!(mask.shape(), (16, 20));
    assert_eq!(mask.missing_count(), 80);
}

#[test]
fn metrics_of_identical_images() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.pgm");
    write_image(&a, &synthetic::rank_four_image(24, 24).map_round()).unwrap();
    let out = wlrd(&["metrics", &a, &a]);
    assert_eq!(out.status.code(), Some(0));
    let f = fields(&out);
    assert_eq!(f["psnr"], "inf");
    assert_eq!(f["ssim"], "1.00000");

    let json = wlrd(&["--json", "metrics", &a, &a]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["psnr"], "inf");
    assert_eq!(v["ssim"], 1.0);
}

#[test]
fn inpaint_end_to_end_with_reference() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synthetic::rank_four_image(32, 32).map_round();
    let mask = gen_mask(&MaskRecipe::RandomPixels { rate: 0.2, seed: 5 }, 32, 32).unwrap();
    let (input, mask_path, output, reference) = (
        path(dir.path(), "in.png"),
        path(dir.path(), "mask.png"),
        path(dir.path(), "out.png"),
        path(dir.path(), "truth.png"),
    );
    write_image(&input, &mask.apply(&truth).unwrap()).unwrap();
    write_mask(&mask_path, &mask).unwrap();
    write_image(&reference, &truth).unwrap();
    let out = wlrd(&[
        "--threads",
        "2",
        "inpaint",
        &input,
        &mask_path,
        &output,
        "--radius",
        "12",
        "--regions",
        "12",
        "--max-outer",
        "3",
        "--reference",
        &reference,
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let f = fields(&out);
    assert_eq!(f["mode"], "inpaint");
    assert_eq!(f["partition"], "sectors");
    assert_eq!(f["outer_stop"], "psnr");
    assert_eq!(f["lambda"], "1.00000");
    assert!(f["psnr"].parse::<f64>().unwrap() > 30.0);
    assert!(f.contains_key("ssim") && f.contains_key("seconds"));
    assert_eq!(read_image(&output).unwrap().shape(), (32, 32));
}

#[test]
fn unconverged_solver_exits_with_two_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synthetic::rank_four_image(20, 20).map_round();
    let mask = gen_mask(&MaskRecipe::RandomPixels { rate: 0.3, seed: 1 }, 20, 20).unwrap();
    let (input, mask_path, output) = (
        path(dir.path(), "in.pgm"),
        path(dir.path(), "mask.pgm"),
        path(dir.path(), "out.pgm"),
    );
    write_image(&input, &truth).unwrap();
    write_mask(&mask_path, &mask).unwrap();
    let out = wlrd(&[
        "--json",
        "complete",
        &input,
        &mask_path,
        &output,
        "--max-iter",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["converged"], false);
    assert_eq!(v["iterations"], 1);
    assert!(Path::new(&output).exists());
}

#[test]
fn destripe_writes_the_stripe_field() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synthetic::sparse_scene(128, 128, 0.2, 2);
    let stripes = synthetic::column_stripes(128, 128, 15.0, 3);
    let striped = wlrd::ImageGrid::from_fn(128, 128, |r, c| {
        (scene.get(r, c) + stripes.get(r, c)).round()
    });
    let (input, output, field) = (
        path(dir.path(), "in.png"),
        path(dir.path(), "clean.png"),
        path(dir.path(), "stripes.png"),
    );
    write_image(&input, &striped).unwrap();
    let out = wlrd(&["destripe", &input, &output, "--stripes", &field]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let f = fields(&out);
    assert_eq!(f["lambda"], "0.00883883");
    let shown = read_image(&field).unwrap();
    for c in 0..128 {
        let col: Vec<f64> = (0..128).map(|r| shown.get(r, c)).collect();
        assert!(col.iter().all(|&v| (v - col[0]).abs() <= 1.0));
    }
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(wlrd(&["--help"]).status.code(), Some(0));
    assert_eq!(wlrd(&["--version"]).status.code(), Some(0));
    assert_eq!(wlrd(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        wlrd(&["--threads", "0", "metrics", "a", "b"]).status.code(),
        Some(1)
    );
    let missing = wlrd(&["metrics", "/nonexistent/a.png", "/nonexistent/b.png"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));
    let dir = tempfile::tempdir().unwrap();
    let out = wlrd(&[
        "genmask",
        "--kind",
        "lines",
        "--count",
        "2",
        "--seed",
        "1",
        "--size",
        "8x8",
        &path(dir.path(), "m.png"),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

trait Round {
    fn map_round(self) -> Self;
}

impl Round for wlrd::ImageGrid {
    fn map_round(mut self) -> Self {
        self.pixels_mut().iter_mut().for_each(|v| *v = v.round());
        self
    }
}
