//! Data model and on-disk representation for pattern stacks, captured image
//! stacks, phasor fields, and frequency sweeps.
//!
//! A scan directory holds one `manifest.json` plus one 16-bit grayscale PNG
//! per (frequency, shift) pair named `pat_K{K}_n{n}.png`. Intensities are
//! normalized to `[0, 1]` on load regardless of capture bit depth; the
//! downstream math is scale-covariant and the zero-frequency constraint
//! removes absolute scale.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3, Array4, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Projector pixel grid. Rows carry the phase ramp; columns are constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectorGeometry {
    pub rows: u32,
    pub cols: u32,
}

impl ProjectorGeometry {
    pub fn new(rows: u32, cols: u32) -> Result<Self> {
        if rows < 8 {
            return Err(Error::InvalidGeometry(format!(
                "projector must have at least 8 rows, got {rows}"
            )));
        }
        if cols < 1 {
            return Err(Error::InvalidGeometry("projector needs at least 1 column".into()));
        }
        Ok(Self { rows, cols })
    }
}

/// Whether sweep magnitudes are raw or divided by the optical envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    MtfNormalized,
}

/// Describes one multi-frequency scan: geometry, shift count, and the
/// ordered frequency list (cycles per projector height).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanManifest {
    pub geometry: ProjectorGeometry,
    pub shifts: u32,
    /// Sorted ascending; K=0, when present, comes first.
    pub frequencies: Vec<u32>,
    pub includes_zero_frequency: bool,
    pub normalization: Normalization,
}

impl ScanManifest {
    pub fn new(
        geometry: ProjectorGeometry,
        shifts: u32,
        frequencies: Vec<u32>,
        includes_zero_frequency: bool,
    ) -> Result<Self> {
        let m = Self {
            geometry,
            shifts,
            frequencies,
            includes_zero_frequency,
            normalization: Normalization::Raw,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.shifts < 3 {
            return Err(Error::InvalidManifest(format!(
                "shifts must be >= 3, got {}",
                self.shifts
            )));
        }
        if self.frequencies.is_empty() {
            return Err(Error::InvalidManifest("frequency list is empty".into()));
        }
        for w in self.frequencies.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidManifest(format!("duplicate frequency K={}", w[0])));
            }
            if w[0] > w[1] {
                return Err(Error::InvalidManifest(
                    "frequencies must be sorted ascending".into(),
                ));
            }
        }
        let max_k = self.geometry.rows / self.shifts;
        for &k in &self.frequencies {
            if k > max_k {
                return Err(Error::InvalidManifest(format!(
                    "K={k} gives a wavelength shorter than the shift count \
                     (max K for {} rows and N={} is {max_k})",
                    self.geometry.rows, self.shifts
                )));
            }
        }
        let has_zero = self.frequencies[0] == 0;
        if self.includes_zero_frequency != has_zero {
            return Err(Error::InvalidManifest(
                "includes_zero_frequency flag disagrees with the frequency list".into(),
            ));
        }
        Ok(())
    }

    /// Frequencies above zero, in ascending order.
    pub fn nonzero_frequencies(&self) -> &[u32] {
        if self.includes_zero_frequency {
            &self.frequencies[1..]
        } else {
            &self.frequencies
        }
    }

    /// Index of frequency `k` in the manifest list.
    pub fn index_of(&self, k: u32) -> Option<usize> {
        self.frequencies.iter().position(|&f| f == k)
    }

    pub fn image_count(&self) -> usize {
        self.frequencies.len() * self.shifts as usize
    }
}

/// An N-shift, multi-frequency image stack, indexed `[k][n][row][col]`.
///
/// `height`/`width` are the stored image dimensions: projector dimensions for
/// generated patterns, camera dimensions for captured or simulated scans.
#[derive(Debug, Clone)]
pub struct ImageStack {
    manifest: ScanManifest,
    data: Array4<f64>,
}

impl ImageStack {
    /// All-zero stack with the given image dimensions.
    pub fn zeros(manifest: ScanManifest, height: usize, width: usize) -> Self {
        let data = Array4::zeros((
            manifest.frequencies.len(),
            manifest.shifts as usize,
            height,
            width,
        ));
        Self { manifest, data }
    }

    pub fn from_data(manifest: ScanManifest, data: Array4<f64>) -> Result<Self> {
        let (nk, nn, _, _) = data.dim();
        if nk != manifest.frequencies.len() || nn != manifest.shifts as usize {
            return Err(Error::DimensionMismatch(format!(
                "stack is {nk} frequencies x {nn} shifts, manifest says {} x {}",
                manifest.frequencies.len(),
                manifest.shifts
            )));
        }
        Ok(Self { manifest, data })
    }

    pub fn manifest(&self) -> &ScanManifest {
        &self.manifest
    }

    pub fn height(&self) -> usize {
        self.data.dim().2
    }

    pub fn width(&self) -> usize {
        self.data.dim().3
    }

    pub fn image(&self, k_index: usize, n: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(ndarray::Axis(0), k_index).index_axis_move(ndarray::Axis(0), n)
    }

    pub fn image_mut(&mut self, k_index: usize, n: usize) -> ArrayViewMut2<'_, f64> {
        self.data
            .index_axis_mut(ndarray::Axis(0), k_index)
            .index_axis_move(ndarray::Axis(0), n)
    }

    /// Samples across the N shifts for one pixel at one frequency.
    pub fn samples(&self, k_index: usize, row: usize, col: usize) -> Vec<f64> {
        (0..self.manifest.shifts as usize)
            .map(|n| self.data[[k_index, n, row, col]])
            .collect()
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }
}

/// On-disk manifest wrapper; records image dimensions next to the scan manifest.
#[derive(Debug, Serialize, Deserialize)]
struct DiskManifest {
    #[serde(flatten)]
    manifest: ScanManifest,
    image_height: usize,
    image_width: usize,
}

fn stack_file_name(k: u32, n: usize) -> String {
    format!("pat_K{k}_n{n}.png")
}

/// Writes `manifest.json` plus one 16-bit grayscale PNG per (K, n).
///
/// Intensities are quantized to 16 bits; the round trip through
/// [`load_stack`] is lossless for quantized values.
pub fn save_stack(stack: &ImageStack, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join("manifest.json");
    let disk = DiskManifest {
        manifest: stack.manifest.clone(),
        image_height: stack.height(),
        image_width: stack.width(),
    };
    let json = serde_json::to_string_pretty(&disk).map_err(|e| Error::json(&manifest_path, e))?;
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;

    let (h, w) = (stack.height(), stack.width());
    for (ki, &k) in stack.manifest.frequencies.iter().enumerate() {
        for n in 0..stack.manifest.shifts as usize {
            let img = stack.image(ki, n);
            let mut buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(w as u32, h as u32);
            for (r, row) in img.outer_iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
                    buf.put_pixel(c as u32, r as u32, image::Luma([q]));
                }
            }
            let path = dir.join(stack_file_name(k, n));
            buf.save(&path).map_err(|e| Error::image(&path, e))?;
        }
    }
    Ok(())
}

/// Loads a stack saved by [`save_stack`], validating the manifest and all
/// image dimensions. Intensities come back in `[0, 1]`.
pub fn load_stack(dir: &Path) -> Result<ImageStack> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::MissingFile(manifest_path));
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let disk: DiskManifest =
        serde_json::from_str(&text).map_err(|e| Error::json(&manifest_path, e))?;
    disk.manifest.validate()?;

    let (h, w) = (disk.image_height, disk.image_width);
    let mut stack = ImageStack::zeros(disk.manifest.clone(), h, w);
    for (ki, &k) in disk.manifest.frequencies.iter().enumerate() {
        for n in 0..disk.manifest.shifts as usize {
            let path = dir.join(stack_file_name(k, n));
            if !path.exists() {
                return Err(Error::MissingFile(path));
            }
            let img = image::open(&path).map_err(|e| Error::image(&path, e))?.into_luma16();
            if img.width() as usize != w || img.height() as usize != h {
                return Err(Error::DimensionMismatch(format!(
                    "{} is {}x{}, manifest says {}x{}",
                    path.display(),
                    img.width(),
                    img.height(),
                    w,
                    h
                )));
            }
            let mut target = stack.image_mut(ki, n);
            for (c, r, p) in img.enumerate_pixels() {
                target[[r as usize, c as usize]] = p.0[0] as f64 / 65535.0;
            }
        }
    }
    Ok(stack)
}

/// Per-pixel, per-frequency phasor data: mean `A` and modulation `(B_re, B_im)`.
#[derive(Debug, Clone)]
pub struct PhasorField {
    pub manifest: ScanManifest,
    /// Mean intensity, `[k][row][col]`.
    pub a: Array3<f64>,
    /// Real modulation component, `[k][row][col]`.
    pub b_re: Array3<f64>,
    /// Imaginary modulation component, `[k][row][col]`.
    pub b_im: Array3<f64>,
}

impl PhasorField {
    pub fn height(&self) -> usize {
        self.a.dim().1
    }

    pub fn width(&self) -> usize {
        self.a.dim().2
    }

    /// Modulation magnitude `|B|` at one pixel and frequency index.
    pub fn magnitude(&self, k_index: usize, row: usize, col: usize) -> f64 {
        self.b_re[[k_index, row, col]].hypot(self.b_im[[k_index, row, col]])
    }

    /// Checks the physical bound `|B| <= A·N/2 + epsilon`: modulation cannot
    /// exceed the mean for a `[0, 1]`-range source. `epsilon` absorbs noise.
    pub fn validate_physical(&self, epsilon: f64) -> Result<()> {
        let half_n = self.manifest.shifts as f64 / 2.0;
        for ki in 0..self.manifest.frequencies.len() {
            for r in 0..self.height() {
                for c in 0..self.width() {
                    let bound = self.a[[ki, r, c]] * half_n + epsilon;
                    let mag = self.magnitude(ki, r, c);
                    if mag > bound {
                        return Err(Error::InvalidManifest(format!(
                            "pixel ({r}, {c}) at frequency index {ki} has |B| = {mag:.4} \
                             above the physical bound {bound:.4}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-pixel `|AB|(K)` over the nonzero frequencies, plus the zero-frequency
/// magnitude `AB0` that anchors the separator constraint.
#[derive(Debug, Clone)]
pub struct FrequencySweep {
    pub manifest: ScanManifest,
    /// Magnitudes aligned with `manifest.nonzero_frequencies()`, `[k][row][col]`.
    pub magnitudes: Array3<f64>,
    /// Zero-frequency magnitude per pixel.
    pub ab0: Array2<f64>,
}

impl FrequencySweep {
    pub fn height(&self) -> usize {
        self.magnitudes.dim().1
    }

    pub fn width(&self) -> usize {
        self.magnitudes.dim().2
    }

    /// Magnitude vector for one pixel, ordered like `nonzero_frequencies()`.
    pub fn pixel(&self, row: usize, col: usize) -> Vec<f64> {
        (0..self.magnitudes.dim().0)
            .map(|k| self.magnitudes[[k, row, col]])
            .collect()
    }
}

/// Writes `pixel,K,magnitude` rows for the requested pixels.
///
/// Magnitudes are printed with seven significant digits.
pub fn export_sweep_csv<W: Write>(
    sweep: &FrequencySweep,
    pixels: &[(usize, usize)],
    out: &mut W,
) -> Result<()> {
    let (h, w) = (sweep.height(), sweep.width());
    for &(r, c) in pixels {
        if r >= h || c >= w {
            return Err(Error::OutOfRangePixel {
                row: r,
                col: c,
                height: h,
                width: w,
            });
        }
    }
    let io_err = |e| Error::io("<sweep csv>", e);
    writeln!(out, "pixel,K,magnitude").map_err(io_err)?;
    let freqs = sweep.manifest.nonzero_frequencies();
    for &(r, c) in pixels {
        for (ki, &k) in freqs.iter().enumerate() {
            writeln!(out, "r{r}c{c},{k},{:.6e}", sweep.magnitudes[[ki, r, c]]).map_err(io_err)?;
        }
    }
    Ok(())
}

/// File variant of [`export_sweep_csv`].
pub fn export_sweep_csv_file(
    sweep: &FrequencySweep,
    pixels: &[(usize, usize)],
    path: &Path,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    export_sweep_csv(sweep, pixels, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes a grayscale PFM (portable float map). NaN marks masked pixels.
///
/// PFM convention: `Pf` header, rows stored bottom-to-top, little-endian
/// (negative scale).
pub fn save_pfm(path: &Path, img: &Array2<f64>) -> Result<()> {
    let (h, w) = img.dim();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write!(out, "Pf\n{w} {h}\n-1.0\n").map_err(|e| Error::io(path, e))?;
    for r in (0..h).rev() {
        for c in 0..w {
            out.write_all(&(img[[r, c]] as f32).to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a grayscale PFM written by [`save_pfm`].
pub fn load_pfm(path: &Path) -> Result<Array2<f64>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let bad = |msg: &str| Error::DimensionMismatch(format!("{}: {msg}", path.display()));

    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    if line.trim() != "Pf" {
        return Err(bad("not a grayscale PFM"));
    }
    line.clear();
    reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let mut dims = line.split_whitespace();
    let w: usize = dims
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("bad width"))?;
    let h: usize = dims
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("bad height"))?;
    line.clear();
    reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let scale: f32 = line.trim().parse().map_err(|_| bad("bad scale"))?;
    if scale >= 0.0 {
        return Err(bad("big-endian PFM not supported"));
    }

    let mut img = Array2::zeros((h, w));
    let mut buf = [0u8; 4];
    for r in (0..h).rev() {
        for c in 0..w {
            reader.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
            img[[r, c]] = f32::from_le_bytes(buf) as f64;
        }
    }
    Ok(img)
}
