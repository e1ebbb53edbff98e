//! Regional climate model samples: scattered (lat, lon) points with five
//! physical channels, organized per year.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geo::{FEATURE_NAMES, PHYSICAL_FEATURES};

/// Channel order within a value vector; matches the tail of
/// [`FEATURE_NAMES`] (everything after lat/lon/thickness).
pub fn physical_channel_names() -> [&'static str; PHYSICAL_FEATURES] {
    let mut names = [""; PHYSICAL_FEATURES];
    for (i, n) in FEATURE_NAMES[3..].iter().enumerate() {
        names[i] = n;
    }
    names
}

/// Samples for one calendar year: parallel lists of (lat, lon) points and
/// five-channel values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarYear {
    points: Vec<(f64, f64)>,
    values: Vec<[f64; PHYSICAL_FEATURES]>,
}

impl MarYear {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn values(&self) -> &[[f64; PHYSICAL_FEATURES]] {
        &self.values
    }

    fn push(&mut self, lat: f64, lon: f64, values: [f64; PHYSICAL_FEATURES]) {
        self.points.push((lat, lon));
        self.values.push(values);
    }
}

fn check_sample(lat: f64, lon: f64, values: &[f64; PHYSICAL_FEATURES]) -> Result<()> {
    if !lat.is_finite() || !lon.is_finite() || values.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::invalid("non-finite climate sample"));
    }
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(CoreError::invalid(format!(
            "climate sample coordinates ({lat}, {lon}) out of range"
        )));
    }
    Ok(())
}

/// All climate samples keyed by year. A set holding exactly one year stands
/// in for every requested year (climatology mode); with several years, each
/// graph must find its own.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarSampleSet {
    years: BTreeMap<i32, MarYear>,
}

impl MarSampleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        year: i32,
        lat: f64,
        lon: f64,
        values: [f64; PHYSICAL_FEATURES],
    ) -> Result<()> {
        check_sample(lat, lon, &values)?;
        self.years.entry(year).or_default().push(lat, lon, values);
        Ok(())
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.years.keys().copied()
    }

    pub fn total_samples(&self) -> usize {
        self.years.values().map(MarYear::len).sum()
    }

    /// Samples for `year`, applying the single-year fallback rule.
    pub fn for_year(&self, year: i32) -> Result<&MarYear> {
        if let Some(y) = self.years.get(&year) {
            return Ok(y);
        }
        if self.years.len() == 1 {
            return Ok(self.years.values().next().expect("len checked"));
        }
        Err(CoreError::invalid(format!(
            "no climate samples for year {year} (have {:?})",
            self.years.keys().collect::<Vec<_>>()
        )))
    }
}

#[derive(Serialize, Deserialize)]
struct MarRow {
    year: i32,
    lat: f64,
    lon: f64,
    smb: f64,
    surface_temp: f64,
    refreeze: f64,
    melt_height: f64,
    snowpack: f64,
}

pub fn write_mar_csv<W: Write>(w: W, set: &MarSampleSet) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (&year, table) in &set.years {
        for (&(lat, lon), v) in table.points.iter().zip(&table.values) {
            out.serialize(MarRow {
                year,
                lat,
                lon,
                smb: v[0],
                surface_temp: v[1],
                refreeze: v[2],
                melt_height: v[3],
                snowpack: v[4],
            })
            .map_err(|e| CoreError::invalid(format!("writing climate csv: {e}")))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_mar_csv_file(path: &Path, set: &MarSampleSet) -> Result<()> {
    write_mar_csv(File::create(path)?, set)
}

pub fn read_mar_csv<R: Read>(r: R) -> Result<MarSampleSet> {
    let mut reader = csv::Reader::from_reader(r);
    let mut set = MarSampleSet::new();
    for (i, row) in reader.deserialize::<MarRow>().enumerate() {
        let row = row.map_err(|e| {
            CoreError::MalformedRecord(format!("climate csv row {}: {e}", i + 1))
        })?;
        set.insert(
            row.year,
            row.lat,
            row.lon,
            [row.smb, row.surface_temp, row.refreeze, row.melt_height, row.snowpack],
        )?;
    }
    Ok(set)
}

pub fn read_mar_csv_file(path: &Path) -> Result<MarSampleSet> {
    read_mar_csv(File::open(path)?)
}
