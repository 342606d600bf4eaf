use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Cohort, IngestError, MicrobiologyTest, PatientStay, SensitivityLabel};

pub const STAY_COLUMNS: [&str; 17] = [
    "patient_unit_stay_id",
    "patient_id",
    "gender",
    "age",
    "ethnicity",
    "height_cm",
    "admit_weight_kg",
    "discharge_weight_kg",
    "unit_location_id",
    "unit_type",
    "unit_stay_type",
    "unit_admit_source",
    "hospital_admit_source",
    "hospital_admit_offset_min",
    "icu_visit_number",
    "admission_dx",
    "unit_admit_year",
];

pub const MICRO_COLUMNS: [&str; 8] = [
    "test_id",
    "patient_unit_stay_id",
    "culture_taken_offset_min",
    "culture_taken_year",
    "culture_site",
    "organism",
    "antibiotic",
    "sensitivity",
];

/// Loads both tables and checks referential integrity. Row order is kept.
pub fn load_tables(stay_file: &Path, micro_file: &Path) -> Result<Cohort, IngestError> {
    let stays = read_stays(open(stay_file)?, &stay_file.display().to_string())?;
    let (tests, dropped) = read_micro(open(micro_file)?, &micro_file.display().to_string())?;
    if dropped > 0 {
        log::warn!(
            "{}: dropped {dropped} rows with a missing sensitivity label",
            micro_file.display()
        );
    }
    let cohort = Cohort { stays, tests };
    cohort.validate()?;
    Ok(cohort)
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(r)
}

/// Positions of the required columns in the file header.
struct Columns<'a> {
    file: &'a str,
    index: HashMap<&'static str, usize>,
}

impl<'a> Columns<'a> {
    fn resolve(
        file: &'a str,
        headers: &csv::StringRecord,
        required: &[&'static str],
    ) -> Result<Self, IngestError> {
        let mut index = HashMap::new();
        for &name in required {
            let pos = headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| IngestError::MissingColumn {
                    file: file.to_string(),
                    column: name.to_string(),
                })?;
            index.insert(name, pos);
        }
        Ok(Self { file, index })
    }
}

struct Row<'r, 'c> {
    cols: &'r Columns<'c>,
    rec: &'r csv::StringRecord,
    row: u64,
}

impl Row<'_, '_> {
    fn raw(&self, name: &'static str) -> &str {
        self.rec.get(self.cols.index[name]).unwrap_or("")
    }

    fn err(&self, name: &str, message: impl Into<String>) -> IngestError {
        IngestError::Cell {
            file: self.cols.file.to_string(),
            row: self.row,
            column: name.to_string(),
            message: message.into(),
        }
    }

    fn text(&self, name: &'static str) -> Option<String> {
        let v = self.raw(name);
        if v.trim().is_empty() {
            None
        } else {
            Some(v.to_string())
        }
    }

    fn required_text(&self, name: &'static str) -> Result<String, IngestError> {
        self.text(name).ok_or_else(|| self.err(name, "required value is missing"))
    }

    fn parsed<T: std::str::FromStr>(&self, name: &'static str) -> Result<Option<T>, IngestError>
    where
        T::Err: std::fmt::Display,
    {
        match self.text(name) {
            None => Ok(None),
            Some(v) => v
                .trim()
                .parse::<T>()
                .map(Some)
                .map_err(|e| self.err(name, format!("cannot parse {v:?}: {e}"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, name: &'static str) -> Result<T, IngestError>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(name)?
            .ok_or_else(|| self.err(name, "required value is missing"))
    }

    fn finite(&self, name: &'static str) -> Result<Option<f64>, IngestError> {
        match self.parsed::<f64>(name)? {
            Some(v) if !v.is_finite() => Err(self.err(name, "value must be finite")),
            other => Ok(other),
        }
    }
}

/// Ages are integers; the de-identified top code ">89" reads as 90.
fn parse_age(raw: &str) -> Result<u32, String> {
    let v = raw.trim();
    if v == ">89" {
        return Ok(90);
    }
    v.parse::<u32>().map_err(|e| format!("cannot parse age {v:?}: {e}"))
}

pub fn read_stays<R: Read>(r: R, file: &str) -> Result<Vec<PatientStay>, IngestError> {
    let mut rdr = reader(r);
    let headers = rdr
        .headers()
        .map_err(|source| IngestError::Csv { file: file.to_string(), source })?
        .clone();
    let cols = Columns::resolve(file, &headers, &STAY_COLUMNS)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| IngestError::Csv { file: file.to_string(), source })?;
        let row = Row { cols: &cols, rec: &rec, row: i as u64 + 1 };
        let age_raw = row.raw("age");
        let age = if age_raw.trim().is_empty() {
            return Err(row.err("age", "required value is missing"));
        } else {
            parse_age(age_raw).map_err(|m| row.err("age", m))?
        };
        let icu_visit_number: u32 = row.required("icu_visit_number")?;
        if icu_visit_number < 1 {
            return Err(row.err("icu_visit_number", "must be >= 1"));
        }
        out.push(PatientStay {
            patient_unit_stay_id: row.required_text("patient_unit_stay_id")?,
            patient_id: row.required_text("patient_id")?,
            gender: row.text("gender"),
            age,
            ethnicity: row.text("ethnicity"),
            height_cm: row.finite("height_cm")?,
            admit_weight_kg: row.finite("admit_weight_kg")?,
            discharge_weight_kg: row.finite("discharge_weight_kg")?,
            unit_location_id: row.text("unit_location_id"),
            unit_type: row.text("unit_type"),
            unit_stay_type: row.text("unit_stay_type"),
            unit_admit_source: row.text("unit_admit_source"),
            hospital_admit_source: row.text("hospital_admit_source"),
            hospital_admit_offset_min: row.parsed("hospital_admit_offset_min")?,
            icu_visit_number,
            admission_dx: row.text("admission_dx"),
            unit_admit_year: row.required("unit_admit_year")?,
        });
    }
    Ok(out)
}

/// Returns the parsed tests and the number of rows dropped for a missing label.
pub fn read_micro<R: Read>(r: R, file: &str) -> Result<(Vec<MicrobiologyTest>, usize), IngestError> {
    let mut rdr = reader(r);
    let headers = rdr
        .headers()
        .map_err(|source| IngestError::Csv { file: file.to_string(), source })?
        .clone();
    let cols = Columns::resolve(file, &headers, &MICRO_COLUMNS)?;
    let mut out = Vec::new();
    let mut dropped = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| IngestError::Csv { file: file.to_string(), source })?;
        let row = Row { cols: &cols, rec: &rec, row: i as u64 + 1 };
        let sensitivity = match row.text("sensitivity") {
            None => {
                dropped += 1;
                continue;
            }
            Some(v) => v
                .parse::<SensitivityLabel>()
                .map_err(|m| row.err("sensitivity", m))?,
        };
        out.push(MicrobiologyTest {
            test_id: row.required_text("test_id")?,
            patient_unit_stay_id: row.required_text("patient_unit_stay_id")?,
            culture_taken_offset_min: row.required("culture_taken_offset_min")?,
            culture_taken_year: row.required("culture_taken_year")?,
            culture_site: row.text("culture_site"),
            organism: row.required_text("organism")?,
            antibiotic: row.required_text("antibiotic")?,
            sensitivity,
        });
    }
    Ok((out, dropped))
}

fn writer<W: Write>(mut w: W, header_comment: Option<&str>) -> std::io::Result<csv::Writer<W>> {
    if let Some(c) = header_comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w))
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

pub fn write_stays<W: Write>(
    w: W,
    stays: &[PatientStay],
    header_comment: Option<&str>,
) -> Result<(), csv::Error> {
    let mut wtr = writer(w, header_comment)?;
    wtr.write_record(STAY_COLUMNS)?;
    for s in stays {
        wtr.write_record([
            s.patient_unit_stay_id.clone(),
            s.patient_id.clone(),
            opt(&s.gender),
            s.age.to_string(),
            opt(&s.ethnicity),
            opt(&s.height_cm),
            opt(&s.admit_weight_kg),
            opt(&s.discharge_weight_kg),
            opt(&s.unit_location_id),
            opt(&s.unit_type),
            opt(&s.unit_stay_type),
            opt(&s.unit_admit_source),
            opt(&s.hospital_admit_source),
            opt(&s.hospital_admit_offset_min),
            s.icu_visit_number.to_string(),
            opt(&s.admission_dx),
            s.unit_admit_year.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_micro<W: Write>(
    w: W,
    tests: &[MicrobiologyTest],
    header_comment: Option<&str>,
) -> Result<(), csv::Error> {
    let mut wtr = writer(w, header_comment)?;
    wtr.write_record(MICRO_COLUMNS)?;
    for t in tests {
        wtr.write_record([
            t.test_id.clone(),
            t.patient_unit_stay_id.clone(),
            t.culture_taken_offset_min.to_string(),
            t.culture_taken_year.to_string(),
            opt(&t.culture_site),
            t.organism.clone(),
            t.antibiotic.clone(),
            t.sensitivity.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
