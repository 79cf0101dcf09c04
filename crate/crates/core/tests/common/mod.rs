//! Synthetic on-disk datasets shared by integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectraseg::data::{write_npy, write_pgm, NpyArray, NpyData, SemanticMask};
use spectraseg::shape::mask_to_edges;

pub const SIZE: usize = 32;
/// Self-supervised features live on a coarser grid, like ViT patches.
pub const SSL_GRID: usize = 16;
pub const VISUAL_DIM: usize = 8;
pub const SSL_DIM: usize = 16;

/// Two disjoint axis-aligned objects (classes 1 and 2) on background, with
/// even corners so the coarse grid represents them exactly.
pub fn planted_labels(rng: &mut ChaCha8Rng) -> SemanticMask {
    loop {
        let mut boxes = Vec::new();
        for _ in 0..2 {
            let h = 2 * rng.gen_range(3..=7);
            let w = 2 * rng.gen_range(3..=7);
            let r = 2 * rng.gen_range(0..=(SIZE - h) / 2);
            let c = 2 * rng.gen_range(0..=(SIZE - w) / 2);
            boxes.push((r, c, h, w));
        }
        let (a, b) = (boxes[0], boxes[1]);
        let apart = a.0 + a.2 + 2 <= b.0
            || b.0 + b.2 + 2 <= a.0
            || a.1 + a.3 + 2 <= b.1
            || b.1 + b.3 + 2 <= a.1;
        if !apart {
            continue;
        }
        let mut labels = vec![0u32; SIZE * SIZE];
        for (k, &(r, c, h, w)) in boxes.iter().enumerate() {
            for i in r..r + h {
                for j in c..c + w {
                    labels[i * SIZE + j] = k as u32 + 1;
                }
            }
        }
        return SemanticMask::new(SIZE, SIZE, labels).unwrap();
    }
}

fn unit(v: &mut [f32]) {
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f32> {
    let mut v: Vec<f32> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    unit(&mut v);
    v
}

/// Writes a complete manifest-driven dataset of `count` images and returns
/// the manifest path. Visual features are the class anchor plus uniform
/// noise of amplitude `visual_noise`, so argmax predictions are imperfect.
pub fn write_dataset(dir: &Path, count: usize, seed: u64, visual_noise: f32) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for sub in ["img", "vis", "ssl", "gt", "bnd"] {
        fs::create_dir_all(dir.join(sub)).unwrap();
    }
    // anchors: background, two unseen classes, one seen class
    let anchors: Vec<Vec<f32>> = (0..4).map(|_| random_unit(&mut rng, VISUAL_DIM)).collect();
    write_npy(
        &NpyArray::new(
            vec![4, VISUAL_DIM],
            NpyData::F32(anchors.iter().flatten().copied().collect()),
        ),
        dir.join("anchors.npy"),
    )
    .unwrap();
    fs::write(dir.join("names.txt"), "background\nalpha\nbeta\ngamma\n").unwrap();

    let mut manifest = String::from(
        "# synthetic planted-cluster dataset\n#dataset=custom3\n#unseen=1,2\n\
         #anchors=anchors.npy\n#anchor_names=names.txt\n",
    );
    for idx in 0..count {
        let gt = planted_labels(&mut rng);
        let id = format!("im{idx:03}");

        let mut vis = Vec::with_capacity(SIZE * SIZE * VISUAL_DIM);
        for &l in gt.labels() {
            for d in 0..VISUAL_DIM {
                vis.push(anchors[l as usize][d] + rng.gen_range(-visual_noise..visual_noise));
            }
        }
        write_npy(
            &NpyArray::new(vec![SIZE, SIZE, VISUAL_DIM], NpyData::F32(vis)),
            dir.join(format!("vis/{id}.npy")),
        )
        .unwrap();

        // region prototypes share a common direction with graded weights so
        // the cluster graph is connected and its spectrum non-degenerate
        let common = random_unit(&mut rng, SSL_DIM);
        let protos: Vec<Vec<f32>> = [0.5f32, 0.3, 0.15]
            .iter()
            .map(|&mix| {
                let own = random_unit(&mut rng, SSL_DIM);
                let mut p: Vec<f32> = own.iter().zip(&common).map(|(o, c)| o + mix * c).collect();
                unit(&mut p);
                p
            })
            .collect();
        let scale = SIZE / SSL_GRID;
        let mut ssl = Vec::with_capacity(SSL_GRID * SSL_GRID * SSL_DIM);
        for r in 0..SSL_GRID {
            for c in 0..SSL_GRID {
                let l = gt.get(r * scale, c * scale) as usize;
                for d in 0..SSL_DIM {
                    ssl.push(protos[l][d] + rng.gen_range(-0.05..0.05));
                }
            }
        }
        write_npy(
            &NpyArray::new(vec![SSL_GRID, SSL_GRID, SSL_DIM], NpyData::F32(ssl)),
            dir.join(format!("ssl/{id}.npy")),
        )
        .unwrap();

        let colors = [[20u8, 30, 40], [200, 40, 40], [40, 200, 60]];
        let mut img = Vec::with_capacity(SIZE * SIZE * 3);
        for &l in gt.labels() {
            for ch in colors[l as usize] {
                img.push(ch.saturating_add(rng.gen_range(0..8)));
            }
        }
        write_npy(
            &NpyArray::new(vec![SIZE, SIZE, 3], NpyData::U8(img)),
            dir.join(format!("img/{id}.npy")),
        )
        .unwrap();

        write_pgm(&gt, dir.join(format!("gt/{id}.pgm"))).unwrap();

        let edges = mask_to_edges::<f64>(&gt);
        let bnd: Vec<f64> = edges
            .values()
            .iter()
            .map(|&e| (0.9 * e + 0.05 + rng.gen_range(-0.04..0.04)).clamp(0.0, 1.0))
            .collect();
        write_npy(
            &NpyArray::new(vec![SIZE, SIZE], NpyData::F64(bnd)),
            dir.join(format!("bnd/{id}.npy")),
        )
        .unwrap();

        writeln!(
            manifest,
            "img/{id}.npy\tvis/{id}.npy\tssl/{id}.npy\tgt/{id}.pgm\tbnd/{id}.npy"
        )
        .unwrap();
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest).unwrap();
    path
}

/// Every file under `root` as (relative path, bytes), sorted.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
