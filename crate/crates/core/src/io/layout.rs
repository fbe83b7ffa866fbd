//! Directory layouts shared by the command-line tool and its tests.
//!
//! A subject directory holds `mprage.mvol`, `t2.mvol` and `flair.mvol`,
//! plus `truth.mvol` when it is an atlas. A model directory holds
//! `axial.insg`, `coronal.insg` and `sagittal.insg`, the run configuration
//! as `config.txt`, and per-epoch losses as `loss_history.tsv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{read_mvol, write_atomic, write_mvol, RunConfig};
use crate::error::{Error, Result};
use crate::net::Network;
use crate::pipeline::LossHistory;
use crate::volume::{LabelMask, MultiContrast, Orientation};

pub const CONTRAST_FILES: [&str; 3] = ["mprage.mvol", "t2.mvol", "flair.mvol"];
pub const TRUTH_FILE: &str = "truth.mvol";
pub const CONFIG_FILE: &str = "config.txt";
pub const LOSS_FILE: &str = "loss_history.tsv";

pub fn model_file(dir: &Path, o: Orientation) -> PathBuf {
    dir.join(format!("{}.insg", o.name()))
}

pub fn read_contrasts(mprage: &Path, t2: &Path, flair: &Path) -> Result<MultiContrast> {
    MultiContrast::new(read_mvol(mprage)?, read_mvol(t2)?, read_mvol(flair)?)
}

pub fn read_subject(dir: &Path) -> Result<MultiContrast> {
    let [a, b, c] = CONTRAST_FILES.map(|f| dir.join(f));
    read_contrasts(&a, &b, &c)
}

pub fn read_mask(path: &Path) -> Result<LabelMask> {
    LabelMask::from_volume(&read_mvol(path)?)
}

pub fn read_atlas(dir: &Path) -> Result<(MultiContrast, LabelMask)> {
    let mc = read_subject(dir)?;
    let truth = read_mask(&dir.join(TRUTH_FILE))?;
    mc.grid().check_same(&truth.grid, "truth vs images")?;
    Ok((mc, truth))
}

pub fn write_atlas(dir: &Path, mc: &MultiContrast, truth: &LabelMask) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, vol) in CONTRAST_FILES.iter().zip(mc.channels()) {
        write_mvol(&dir.join(name), vol)?;
    }
    write_mvol(&dir.join(TRUTH_FILE), &truth.to_volume())
}

/// Every immediate subdirectory that holds an atlas, in name order.
pub fn read_atlas_dir(dir: &Path) -> Result<Vec<(MultiContrast, LabelMask)>> {
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.join(TRUTH_FILE).is_file())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(Error::Config(format!("no atlas subdirectories under {}", dir.display())));
    }
    subdirs.iter().map(|d| read_atlas(d)).collect()
}

pub fn loss_table(histories: &[(Orientation, LossHistory)]) -> String {
    let mut s = String::from("orientation\tepoch\ttrain\tvalidation\n");
    for (o, h) in histories {
        for (e, (t, v)) in h.train.iter().zip(&h.validation).enumerate() {
            let _ = writeln!(s, "{o}\t{}\t{t:?}\t{v:?}", e + 1);
        }
    }
    s
}

pub fn write_models(
    dir: &Path,
    models: &[Network; 3],
    cfg: &RunConfig,
    histories: &[(Orientation, LossHistory)],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (o, net) in Orientation::ALL.iter().zip(models) {
        net.save(&model_file(dir, *o))?;
    }
    write_atomic(&dir.join(CONFIG_FILE), cfg.to_text().as_bytes())?;
    write_atomic(&dir.join(LOSS_FILE), loss_table(histories).as_bytes())
}

/// The three models in axial, coronal, sagittal order, plus the saved run
/// configuration (defaults when the directory has none).
pub fn read_models(dir: &Path) -> Result<([Network; 3], RunConfig)> {
    let [a, c, s] = Orientation::ALL.map(|o| Network::load(&model_file(dir, o)));
    let cfg_path = dir.join(CONFIG_FILE);
    let cfg = if cfg_path.is_file() {
        let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
        RunConfig::parse(&text)?
    } else {
        RunConfig::default()
    };
    Ok(([a?, c?, s?], cfg))
}
