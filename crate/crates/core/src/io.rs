//! File formats: LFT1 lifted fields, grayscale images, trajectory CSV,
//! landmark JSON and heatmap stacks.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::eikonal::{DistanceMap, SolveStats};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, LiftedField, UNREACHED};
use crate::landmarks::{Heatmap, CHANNEL_NAMES};
use crate::lift::{Trajectory, TrajectoryPoint};
use crate::raster::Raster;
use crate::types::{LiftedLandmark, MetricParams};

pub const LFT1_MAGIC: &[u8; 4] = b"LFT1";

/// Encodes a field as the LFT1 container: 16-byte header, then little-endian
/// f32 values in x-major order. [`UNREACHED`] is stored as `f32::MAX`.
pub fn encode_lft1(field: &LiftedField) -> Vec<u8> {
    let s = field.spec();
    let mut out = Vec::with_capacity(16 + 4 * s.len());
    out.extend_from_slice(LFT1_MAGIC);
    for d in [s.width, s.height, s.n_theta] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in field.values() {
        let f = if v >= UNREACHED { f32::MAX } else { v as f32 };
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}

pub fn decode_lft1(bytes: &[u8]) -> Result<LiftedField> {
    if bytes.len() < 16 || &bytes[..4] != LFT1_MAGIC {
        return Err(Error::Parse("not an LFT1 container".into()));
    }
    let dim = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let spec = GridSpec::new(dim(4), dim(8), dim(12)).map_err(|e| Error::Parse(format!("bad LFT1 header: {e}")))?;
    let body = &bytes[16..];
    if body.len() != 4 * spec.len() {
        return Err(Error::Parse(format!(
            "LFT1 body holds {} bytes, expected {}",
            body.len(),
            4 * spec.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| {
            let f = f32::from_le_bytes(c.try_into().unwrap());
            if f == f32::MAX {
                UNREACHED
            } else {
                f as f64
            }
        })
        .collect();
    LiftedField::from_values(spec, values)
}

pub fn write_lft1(path: impl AsRef<Path>, field: &LiftedField) -> Result<()> {
    write_bytes(path, &encode_lft1(field))
}

pub fn read_lft1(path: impl AsRef<Path>) -> Result<LiftedField> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    decode_lft1(&buf)
}

pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Metadata written next to a serialized distance map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceSidecar {
    pub seed: LiftedLandmark,
    pub params: MetricParams,
    pub accepted: usize,
    pub early_abort: bool,
}

/// Writes `<stem>.lft` and `<stem>.json`.
pub fn write_distance_map(stem: impl AsRef<Path>, map: &DistanceMap, params: &MetricParams) -> Result<()> {
    let stem = stem.as_ref();
    write_lft1(stem.with_extension("lft"), &map.field)?;
    write_json(
        stem.with_extension("json"),
        &DistanceSidecar {
            seed: map.seed,
            params: *params,
            accepted: map.stats.accepted,
            early_abort: map.stats.early_abort,
        },
    )
}

pub fn read_distance_map(stem: impl AsRef<Path>) -> Result<(DistanceMap, MetricParams)> {
    let stem = stem.as_ref();
    let field = read_lft1(stem.with_extension("lft"))?;
    let side: DistanceSidecar = read_json(stem.with_extension("json"))?;
    let stats = SolveStats {
        accepted: side.accepted,
        causality_violations: 0,
        early_abort: side.early_abort,
    };
    Ok((
        DistanceMap {
            field,
            seed: side.seed,
            stats,
        },
        side.params,
    ))
}

/// Reads an 8- or 16-bit grayscale PNG/PGM as values in `[0, 1]`.
pub fn read_gray(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    let img = image::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let luma = img.to_luma16();
    let (w, h) = luma.dimensions();
    Raster::from_vec(
        w as usize,
        h as usize,
        luma.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
    )
}

/// Writes values clamped to `[0, 1]` as an 8-bit grayscale PNG (or PGM by extension).
pub fn write_gray(path: impl AsRef<Path>, raster: &Raster) -> Result<()> {
    let path = path.as_ref();
    let buf: Vec<u8> = raster
        .data
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = image::GrayImage::from_raw(raster.width as u32, raster.height as u32, buf)
        .ok_or_else(|| Error::Config("raster size mismatch".into()))?;
    ensure_parent(path)?;
    img.save(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct TrajectoryRow {
    track_id: i64,
    t: f64,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
}

/// Parses `track_id,t,x,y,vx,vy` rows; tracks keep first-appearance order and
/// points are sorted by `t`.
pub fn parse_trajectories(reader: impl Read) -> Result<Vec<Trajectory>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    for col in ["track_id", "t", "x", "y", "vx", "vy"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Parse(format!("trajectory CSV lacks column {col:?}")));
        }
    }
    let mut tracks: Vec<Trajectory> = Vec::new();
    let mut slot = std::collections::HashMap::new();
    for row in rdr.deserialize::<TrajectoryRow>() {
        let r = row.map_err(|e| Error::Parse(e.to_string()))?;
        let idx = *slot.entry(r.track_id).or_insert_with(|| {
            tracks.push(Trajectory {
                track_id: r.track_id,
                points: Vec::new(),
            });
            tracks.len() - 1
        });
        tracks[idx].points.push(TrajectoryPoint {
            x: r.x,
            y: r.y,
            vx: r.vx,
            vy: r.vy,
            t: r.t,
        });
    }
    for t in &mut tracks {
        t.points.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    Ok(tracks)
}

pub fn read_trajectories(path: impl AsRef<Path>) -> Result<Vec<Trajectory>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trajectories(BufReader::new(f))
}

pub fn write_trajectories(path: impl AsRef<Path>, tracks: &[Trajectory]) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let mut s = String::from("track_id,t,x,y,vx,vy\n");
    for t in tracks {
        for p in &t.points {
            s.push_str(&format!("{},{},{},{},{},{}\n", t.track_id, p.t, p.x, p.y, p.vx, p.vy));
        }
    }
    w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}

fn tiff_err(path: &Path, e: tiff::TiffError) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

/// Four-page 32-bit float TIFF, channels in fixed order.
pub fn write_heatmap_tiff(path: impl AsRef<Path>, hm: &Heatmap) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = tiff::encoder::TiffEncoder::new(BufWriter::new(f)).map_err(|e| tiff_err(path, e))?;
    for ch in &hm.channels {
        let data: Vec<f32> = ch.data.iter().map(|&v| v as f32).collect();
        enc.write_image::<tiff::encoder::colortype::Gray32Float>(ch.width as u32, ch.height as u32, &data)
            .map_err(|e| tiff_err(path, e))?;
    }
    Ok(())
}

pub fn read_heatmap_tiff(path: impl AsRef<Path>) -> Result<Heatmap> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = tiff::decoder::Decoder::new(BufReader::new(f)).map_err(|e| tiff_err(path, e))?;
    let mut pages = Vec::with_capacity(4);
    loop {
        let (w, h) = dec.dimensions().map_err(|e| tiff_err(path, e))?;
        let data: Vec<f64> = match dec.read_image().map_err(|e| tiff_err(path, e))? {
            tiff::decoder::DecodingResult::F32(v) => v.into_iter().map(f64::from).collect(),
            tiff::decoder::DecodingResult::F64(v) => v,
            tiff::decoder::DecodingResult::U8(v) => v.into_iter().map(|x| x as f64 / 255.0).collect(),
            tiff::decoder::DecodingResult::U16(v) => v.into_iter().map(|x| x as f64 / 65535.0).collect(),
            _ => return Err(Error::Parse(format!("{}: unsupported TIFF sample type", path.display()))),
        };
        pages.push(Raster::from_vec(w as usize, h as usize, data)?);
        if pages.len() == 4 || !dec.more_images() {
            break;
        }
        dec.next_image().map_err(|e| tiff_err(path, e))?;
    }
    if pages.len() != 4 {
        return Err(Error::Parse(format!("{}: expected 4 pages, found {}", path.display(), pages.len())));
    }
    let hm = Heatmap {
        channels: pages.try_into().expect("four pages"),
    };
    hm.validate()?;
    Ok(hm)
}

/// Paths `<stem>_{endpoint,bifurcation,crossing,relaxed}.png`.
pub fn heatmap_png_paths(stem: impl AsRef<Path>) -> [PathBuf; 4] {
    let stem = stem.as_ref();
    let base = stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    std::array::from_fn(|c| stem.with_file_name(format!("{base}_{}.png", CHANNEL_NAMES[c])))
}

pub fn write_heatmap_pngs(stem: impl AsRef<Path>, hm: &Heatmap) -> Result<()> {
    for (path, ch) in heatmap_png_paths(stem).iter().zip(&hm.channels) {
        write_gray(path, ch)?;
    }
    Ok(())
}

pub fn read_heatmap_pngs(stem: impl AsRef<Path>) -> Result<Heatmap> {
    let mut chans = Vec::with_capacity(4);
    for p in heatmap_png_paths(stem) {
        chans.push(read_gray(p)?);
    }
    let hm = Heatmap {
        channels: chans.try_into().expect("four channels"),
    };
    hm.validate()?;
    Ok(hm)
}

/// Reads a heatmap from a `.tif`/`.tiff` file or a PNG stem.
pub fn read_heatmap(path: impl AsRef<Path>) -> Result<Heatmap> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("tif") | Some("tiff") => read_heatmap_tiff(path),
        _ => read_heatmap_pngs(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lft1_header_layout() {
        let spec = GridSpec::new(3, 2, 4).unwrap();
        let mut f = LiftedField::from_fn(spec, |i, j, k| (i * 100 + j * 10 + k) as f64);
        f.set(2, 1, 3, UNREACHED);
        let bytes = encode_lft1(&f);
        assert_eq!(&bytes[..4], b"LFT1");
        assert_eq!(&bytes[4..16], &[3, 0, 0, 0, 2, 0, 0, 0, 4, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 4 * 24);
        // x-major: the second stored value is (0, 0, 1)
        assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), 1.0);
        assert_eq!(f32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap()), f32::MAX);
        let back = decode_lft1(&bytes).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn lft1_rejects_garbage() {
        assert!(decode_lft1(b"LFT0").is_err());
        let mut bytes = encode_lft1(&LiftedField::zeros(GridSpec::new(2, 2, 4).unwrap()));
        bytes.pop();
        assert!(decode_lft1(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn lft1_roundtrip_is_f32_exact(vals in proptest::collection::vec(-1e6f32..1e6, 2 * 3 * 4)) {
            let spec = GridSpec::new(2, 3, 4).unwrap();
            let f = LiftedField::from_values(spec, vals.iter().map(|&v| v as f64).collect()).unwrap();
            prop_assert_eq!(decode_lft1(&encode_lft1(&f)).unwrap(), f);
        }
    }

    #[test]
    fn trajectory_csv() {
        let text = "track_id,t,x,y,vx,vy\n7,1,2.0,3.0,1.0,0.0\n7,0,1.0,3.0,1.0,0.0\n2,0,5,5,0,1\n";
        let tr = parse_trajectories(text.as_bytes()).unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr[0].track_id, 7);
        assert_eq!(tr[0].points[0].x, 1.0);
        assert!(parse_trajectories("id,x\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn heatmap_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut hm = Heatmap::zeros(6, 5);
        hm.channels[1].set(2, 3, 0.75);
        hm.channels[3].set(2, 3, 0.75);
        let tif = dir.path().join("hm.tif");
        write_heatmap_tiff(&tif, &hm).unwrap();
        let back = read_heatmap(&tif).unwrap();
        assert_eq!(back, hm);

        write_heatmap_pngs(dir.path().join("hm"), &hm).unwrap();
        assert!(dir.path().join("hm_bifurcation.png").exists());
        let png = read_heatmap(dir.path().join("hm")).unwrap();
        assert!((png.channels[1].get(2, 3) - 0.75).abs() < 1.0 / 255.0);
    }

    #[test]
    fn gray_png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let r = Raster::from_fn(7, 4, |x, y| (x + y) as f64 / 10.0);
        let p = dir.path().join("a.png");
        write_gray(&p, &r).unwrap();
        let back = read_gray(&p).unwrap();
        assert_eq!((back.width, back.height), (7, 4));
        for (a, b) in back.data.iter().zip(&r.data) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-9);
        }
        let pgm = dir.path().join("a.pgm");
        write_gray(&pgm, &r).unwrap();
        assert_eq!(read_gray(&pgm).unwrap(), back);
        assert!(matches!(read_gray(dir.path().join("missing.png")), Err(Error::Io { .. })));
    }
}
