//! Synthetic flight-line generator for desk-scale experiments.
//!
//! Each record lives in its own disjoint geographic tile. Within a tile the
//! generator draws a latent accumulation factor `z` that scales the deep
//! (target-year) layers but leaves the shallow (input-year) layers alone, so
//! `z` is invisible in the base features a model sees. In informative mode
//! the climate set's `smb` channel equals `z` at every sample point of the
//! tile: a model that ingests the physical channels can recover exactly the
//! signal the base features are missing, which is what the physics-ablation
//! experiment measures. Tiles are spatially separated, so a model cannot
//! recover `z` for one tile by interpolating labels from another.

use crate::error::{CoreError, Result};
use crate::geo::{TraceCoordinates, TRACE_COUNT};
use crate::nn::{stream, RngState};

use super::mar::MarSampleSet;
use super::records::LabeledImageRecord;

/// Boundary rows per record: one surface pick plus twenty annual layers.
pub const SYNTH_BOUNDARIES: usize = 21;
/// Acquisition year stamped on every synthetic record.
pub const SYNTH_ACQUISITION_YEAR: i32 = 2012;
/// Tile layout: up to 20 columns by 20 rows of disjoint tiles.
const TILE_COLS: usize = 20;
const MAX_RECORDS: usize = TILE_COLS * 20;
/// Relative strength of the latent factor on deep layers.
const LATENT_GAIN: f64 = 0.4;
/// Relative strength of the shared along-track surface field.
const SURFACE_GAIN: f64 = 0.15;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_records: usize,
    /// Relative per-pixel thickness noise, in [0, 0.5].
    pub noise: f64,
    /// Sinusoid components in the along-track surface field, ≥ 1.
    pub components: usize,
    /// Emit a climate sample set alongside the records.
    pub with_mar: bool,
    /// Make the smb channel carry the deep-layer latent factor.
    pub informative: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            n_records: 40,
            noise: 0.05,
            components: 3,
            with_mar: true,
            informative: true,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_records == 0 || self.n_records > MAX_RECORDS {
            return Err(CoreError::invalid(format!(
                "n_records must be in 1..={MAX_RECORDS}, got {}",
                self.n_records
            )));
        }
        if !(0.0..=0.5).contains(&self.noise) {
            return Err(CoreError::invalid(format!(
                "noise must be in [0, 0.5], got {}",
                self.noise
            )));
        }
        if self.components == 0 {
            return Err(CoreError::invalid("components must be ≥ 1"));
        }
        if self.informative && !self.with_mar {
            return Err(CoreError::invalid(
                "informative mode requires climate samples (with_mar)",
            ));
        }
        if self.informative && self.n_records < 4 {
            return Err(CoreError::invalid(
                "informative mode needs ≥ 4 records for a meaningful correlation check",
            ));
        }
        Ok(())
    }
}

fn tile_center(r: usize) -> (f64, f64) {
    let lat = 61.0 + 1.1 * (r / TILE_COLS) as f64;
    let lon = -58.0 + 2.4 * (r % TILE_COLS) as f64;
    (lat, lon)
}

/// Along-track surface field in [-1, 1]: a small sum of sinusoids.
struct SurfaceField {
    amps: Vec<f64>,
    freqs: Vec<f64>,
    phases: Vec<f64>,
    norm: f64,
}

impl SurfaceField {
    fn draw(rng: &mut RngState, components: usize) -> Self {
        let amps: Vec<f64> = (0..components).map(|_| rng.uniform(0.5, 1.0)).collect();
        let freqs: Vec<f64> =
            (0..components).map(|_| (1 + rng.next_below(4)) as f64).collect();
        let phases: Vec<f64> = (0..components)
            .map(|_| rng.uniform(0.0, std::f64::consts::TAU))
            .collect();
        let norm = amps.iter().sum::<f64>();
        SurfaceField { amps, freqs, phases, norm }
    }

    fn at(&self, i: usize) -> f64 {
        let t = i as f64 / TRACE_COUNT as f64;
        let mut s = 0.0;
        for ((&a, &f), &p) in self.amps.iter().zip(&self.freqs).zip(&self.phases) {
            s += a * (std::f64::consts::TAU * f * t + p).sin();
        }
        s / self.norm
    }
}

struct TileDraw {
    record: LabeledImageRecord,
    /// Latent deep-layer factor z.
    latent: f64,
    /// Per-trace mean thickness over the 15 deep layers.
    deep_mean: Vec<f64>,
}

fn generate_tile(cfg: &SynthConfig, rng: &mut RngState, r: usize) -> Result<TileDraw> {
    let (lat_c, lon_c) = tile_center(r);
    let latent = rng.uniform(-1.0, 1.0);
    let path_phase = rng.uniform(0.0, std::f64::consts::TAU);
    let surface = SurfaceField::draw(rng, cfg.components);
    let base_row = rng.uniform(16.0, 24.0);

    let mut lat = Vec::with_capacity(TRACE_COUNT);
    let mut lon = Vec::with_capacity(TRACE_COUNT);
    for i in 0..TRACE_COUNT {
        let t = i as f64 / (TRACE_COUNT - 1) as f64;
        lat.push(lat_c + 0.28 * (std::f64::consts::TAU * t + path_phase).sin());
        lon.push(lon_c + 1.6 * (t - 0.5));
    }
    let coords = TraceCoordinates::new(lat, lon)?;

    // Accumulate boundaries from strictly positive per-layer thickness.
    let mut boundaries: Vec<Vec<Option<f64>>> = Vec::with_capacity(SYNTH_BOUNDARIES);
    boundaries.push(
        (0..TRACE_COUNT)
            .map(|i| Some(base_row + 2.0 * surface.at(i)))
            .collect(),
    );
    let mut deep_sum = vec![0.0; TRACE_COUNT];
    for k in 0..SYNTH_BOUNDARIES - 1 {
        let base = 10.0 + 0.6 * k as f64;
        // Input-year layers carry no latent signal; deep layers do.
        let gain = if k < super::INPUT_YEARS { 0.0 } else { LATENT_GAIN };
        let prev = boundaries.last().expect("seeded with surface row");
        let mut row = Vec::with_capacity(TRACE_COUNT);
        for i in 0..TRACE_COUNT {
            let u = rng.uniform(-1.0, 1.0);
            let theta = base
                * (1.0 + gain * latent)
                * (1.0 + SURFACE_GAIN * surface.at(i))
                * (1.0 + cfg.noise * u);
            debug_assert!(theta > 0.0);
            if k >= super::INPUT_YEARS {
                deep_sum[i] += theta;
            }
            row.push(Some(prev[i].expect("synthetic rows are complete") + theta));
        }
        boundaries.push(row);
    }
    let deep_mean = deep_sum
        .iter()
        .map(|s| s / (SYNTH_BOUNDARIES - 1 - super::INPUT_YEARS) as f64)
        .collect();

    let record = LabeledImageRecord::new(
        format!("synth-{}-{r:04}", cfg.seed),
        SYNTH_ACQUISITION_YEAR,
        coords,
        boundaries,
    )?;
    Ok(TileDraw { record, latent, deep_mean })
}

/// 4×4 climate sample grid covering one tile, strictly containing the
/// flight path so interior queries never leave the tile's own samples.
fn tile_grid(lat_c: f64, lon_c: f64) -> Vec<(f64, f64)> {
    const LAT_OFF: [f64; 4] = [-0.45, -0.15, 0.15, 0.45];
    const LON_OFF: [f64; 4] = [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0];
    let mut out = Vec::with_capacity(16);
    for &dla in &LAT_OFF {
        for &dlo in &LON_OFF {
            out.push((lat_c + dla, lon_c + dlo));
        }
    }
    out
}

/// Pearson correlation between a per-record channel value and the
/// per-trace deep-layer mean thickness, pooled over all (record, trace)
/// pairs.
fn pooled_correlation(channel: &[f64], deep_means: &[Vec<f64>]) -> f64 {
    let n = (channel.len() * TRACE_COUNT) as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (c, row) in channel.iter().zip(deep_means) {
        sx += c * TRACE_COUNT as f64;
        sy += row.iter().sum::<f64>();
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (c, row) in channel.iter().zip(deep_means) {
        for &y in row {
            cov += (c - mx) * (y - my);
            vx += (c - mx) * (c - mx);
            vy += (y - my) * (y - my);
        }
    }
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Correlation the informative channel must reach before the generator
/// will vouch for its output.
pub const INFORMATIVE_MIN_CORRELATION: f64 = 0.8;

/// Generate `n_records` synthetic records and, optionally, a matching
/// climate sample set for the five input years. Deterministic in the seed.
pub fn synth_generate(
    cfg: &SynthConfig,
) -> Result<(Vec<LabeledImageRecord>, Option<MarSampleSet>)> {
    cfg.validate()?;
    let mut rng = RngState::with_stream(cfg.seed, stream::INIT);
    let mut records = Vec::with_capacity(cfg.n_records);
    let mut latents = Vec::with_capacity(cfg.n_records);
    let mut deep_means = Vec::with_capacity(cfg.n_records);
    for r in 0..cfg.n_records {
        let tile = generate_tile(cfg, &mut rng, r)?;
        records.push(tile.record);
        latents.push(tile.latent);
        deep_means.push(tile.deep_mean);
    }

    let mar = if cfg.with_mar {
        let mut set = MarSampleSet::new();
        let input_years = (SYNTH_ACQUISITION_YEAR - super::INPUT_YEARS as i32)
            ..SYNTH_ACQUISITION_YEAR;
        for (r, &z) in latents.iter().enumerate() {
            let (lat_c, lon_c) = tile_center(r);
            // In the uninformative variant smb is still tile-constant but
            // independent of the latent factor.
            let decoy = rng.uniform(-1.0, 1.0);
            let smb = if cfg.informative { z } else { decoy };
            for year in input_years.clone() {
                let age = (year - input_years.start) as f64;
                for (lat, lon) in tile_grid(lat_c, lon_c) {
                    set.insert(
                        year,
                        lat,
                        lon,
                        [
                            smb,
                            -18.0 + 0.4 * (lat - 70.0) + 0.05 * age,
                            0.05 + 0.002 * (lon + 50.0),
                            0.2 + 0.02 * age,
                            1.0 + 0.01 * (lat - 61.0),
                        ],
                    )?;
                }
            }
        }
        Some(set)
    } else {
        None
    };

    if cfg.informative {
        let corr = pooled_correlation(&latents, &deep_means);
        if corr < INFORMATIVE_MIN_CORRELATION {
            return Err(CoreError::Contract(format!(
                "informative channel correlation {corr:.3} below {INFORMATIVE_MIN_CORRELATION}"
            )));
        }
    }
    Ok((records, mar))
}
