use std::collections::HashMap;
use std::path::Path;

use lambdacoal::estimators::Bound;
use lambdacoal::{extract_stats, fit, parse_newick, FitResult, LambdaMeasure, Method};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::FitSettings;
use crate::error::{read_input, CliError, Result};
use crate::output::{csv_bytes, FileHash, OutDir, RunManifest};

/// Reads `label,date` rows; a first row whose date is not a number is taken
/// as a header.
pub fn read_dates(bytes: &[u8], path: &Path) -> Result<HashMap<String, f64>> {
    let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes);
    let mut dates = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() < 2 {
            return Err(bad(format!("line {} needs label and date", i + 1)));
        }
        match record[1].parse::<f64>() {
            Ok(date) if date.is_finite() => {
                if dates.insert(record[0].to_string(), date).is_some() {
                    return Err(bad(format!("duplicate label {:?}", &record[0])));
                }
            }
            _ if i == 0 => continue,
            _ => return Err(bad(format!("line {}: date {:?} is not a number", i + 1, &record[1]))),
        }
    }
    Ok(dates)
}

pub fn trajectory_csv(result: &FitResult) -> Vec<u8> {
    let s = &result.trajectory;
    let mids = s.midpoints();
    csv_bytes(
        &["t", "median", "lo", "hi"],
        (0..s.cells()).map(|d| {
            vec![
                mids[d].to_string(),
                s.median[d].to_string(),
                s.lower[d].to_string(),
                s.upper[d].to_string(),
            ]
        }),
    )
}

fn chain_csv(result: &FitResult) -> Option<Vec<u8>> {
    let chain = result.chain.as_ref()?;
    let cells = chain.points.len() - 1;
    let mut header = vec!["alpha".to_string(), "tau".to_string()];
    header.extend((0..cells).map(|d| format!("gamma_{d}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    Some(csv_bytes(
        &header,
        (0..chain.len()).map(|i| {
            let mut row = vec![chain.alpha[i].to_string(), chain.tau[i].to_string()];
            row.extend(chain.gamma[i].iter().map(|g| g.to_string()));
            row
        }),
    ))
}

pub fn run(settings: &FitSettings, mut out: OutDir) -> Result<RunManifest> {
    let tree_bytes = read_input(&settings.tree)?;
    let mut inputs = vec![FileHash::of(settings.tree.display().to_string(), &tree_bytes)];
    let text = String::from_utf8(tree_bytes)
        .map_err(|_| CliError::Input(format!("{} is not UTF-8", settings.tree.display())))?;
    let dates = match &settings.dates {
        Some(path) => {
            let bytes = read_input(path)?;
            inputs.push(FileHash::of(path.display().to_string(), &bytes));
            Some(read_dates(&bytes, path)?)
        }
        None => None,
    };
    let tree = parse_newick(&text, dates.as_ref())?;
    let data = extract_stats(&tree)?;
    let measure = settings.measure.as_deref().map(str::parse::<LambdaMeasure>).transpose()?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let result = fit(&data, settings.method, measure.as_ref(), &settings.fit, &mut rng)?;

    let mut json = serde_json::to_vec_pretty(&result).expect("fit result serializes");
    json.push(b'\n');
    out.write("fit.json", &json)?;
    out.write("trajectory.csv", &trajectory_csv(&result))?;
    if let Some(bytes) = chain_csv(&result) {
        out.write("chain.csv", &bytes)?;
    }
    match settings.method {
        Method::Mcmc => println!(
            "alpha median {:.4}, mean {:.4}",
            result.alpha,
            result.alpha_mean.unwrap_or(f64::NAN)
        ),
        _ => println!("alpha {:.4}", result.alpha),
    }
    if let Some(bound) = result.alpha_boundary {
        let side = match bound {
            Bound::Lower => "lower",
            Bound::Upper => "upper",
        };
        println!("estimate at the {side} end of the search interval");
    }
    out.finish("fit", settings, settings.seed, inputs)
}
