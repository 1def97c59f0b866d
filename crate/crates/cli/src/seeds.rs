use crate::error::CliError;

/// Parse a seed list: `7`, `1,4,9`, `1..10` or `1..=10` (both inclusive),
/// or a comma-separated mix of these.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, CliError> {
    let bad = |part: &str| CliError::validation(format!("seeds: cannot parse {part:?}"));
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim) {
        if part.is_empty() {
            return Err(bad(part));
        }
        if let Some((a, b)) = part.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let lo: u64 = a.trim().parse().map_err(|_| bad(part))?;
            let hi: u64 = b.trim().parse().map_err(|_| bad(part))?;
            if hi < lo {
                return Err(CliError::validation(format!("seeds: empty range {part:?}")));
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| bad(part))?);
        }
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = out.iter().find(|s| !seen.insert(**s)) {
        return Err(CliError::validation(format!("seeds: {dup} listed twice")));
    }
    Ok(out)
}
