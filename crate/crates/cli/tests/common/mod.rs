//! Synthetic dataset roots on disk.

#![allow(dead_code)]

use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};

/// One pair of the fixture: split directory, file stem, and the mask
/// drawn with `#` for changed pixels.
pub struct FixturePair {
    pub split: &'static str,
    pub id: &'static str,
    pub mask: Vec<&'static str>,
}

pub fn pair(split: &'static str, id: &'static str, mask: &[&'static str]) -> FixturePair {
    FixturePair {
        split,
        id,
        mask: mask.to_vec(),
    }
}

/// Writes `split/{A,B,label}/id.png` for every pair under `root`.
pub fn write_dataset(root: &Path, pairs: &[FixturePair]) {
    for p in pairs {
        let height = p.mask.len() as u32;
        let width = p.mask[0].len() as u32;
        let mut mask = GrayImage::new(width, height);
        for (r, row) in p.mask.iter().enumerate() {
            assert_eq!(row.len() as u32, width, "ragged fixture mask {}", p.id);
            for (c, ch) in row.chars().enumerate() {
                mask.put_pixel(c as u32, r as u32, Luma([if ch == '#' { 255 } else { 0 }]));
            }
        }
        for (dir, shade) in [("A", 40u8), ("B", 200u8)] {
            let img = RgbImage::from_fn(width, height, |x, y| Rgb([shade, (x * 7) as u8, (y * 11) as u8]));
            let path = root.join(p.split).join(dir).join(format!("{}.png", p.id));
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            img.save(&path).unwrap();
        }
        let path = root.join(p.split).join("label").join(format!("{}.png", p.id));
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        mask.save(&path).unwrap();
    }
}

/// Pairs across all three splits: two without change, the rest with
/// 1, 2, 3, 7 and 12 regions under 8-connectivity.
pub fn standard_pairs() -> Vec<FixturePair> {
    vec![
        pair("train", "t_empty", &["......", "......", "......", "......"]),
        pair("train", "t_one", &["......", ".##...", ".##...", "......"]),
        pair("train", "t_diag", &["#.....", ".#....", "....#.", "......"]),
        pair("val", "v_three", &["#.#.#.", "......", "......", "......"]),
        pair("val", "v_empty", &["......", "......", "......", "......"]),
        pair("test", "s_seven", &["#.#.#.#", ".......", "#.#.#..", "......."]),
        pair(
            "test",
            "s_twelve",
            &["#.#.#.#", ".......", "#.#.#.#", ".......", "#.#.#.#", "......."],
        ),
    ]
}

/// Caption corpus in the bundle form, one entry per changed pair.
pub fn standard_captions() -> String {
    serde_json::json!({
        "images": [
            {"filename": "t_one.png", "sentences": [{"raw": "a building appears in the field"}]},
            {"filename": "t_diag.png", "sentences": [{"raw": "small sheds were built"}, {"raw": "huts appear along the road."}]},
            {"filename": "v_three.png", "sentences": [{"raw": "houses appear at the top"}]},
            {"filename": "s_seven.png", "sentences": [{"raw": "many new houses cover the area"}]},
            {"filename": "s_twelve.png", "sentences": [{"raw": "a dense grid of buildings is added"}]}
        ]
    })
    .to_string()
}
