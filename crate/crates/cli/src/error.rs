use std::fmt;

/// Failure of a CLI run, one variant per exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config { key: String, message: String },
    Numerical(String),
    Io { path: String, message: String },
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { key: key.into(), message: message.into() }
    }

    pub fn io(path: impl fmt::Display, err: impl fmt::Display) -> Self {
        CliError::Io { path: path.to_string(), message: err.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    /// Maps a library error raised while handling config block `block`.
    pub fn from_core(err: modeswap::Error, block: &str) -> Self {
        use modeswap::Error as E;
        match err {
            E::InvalidParameter { field, reason } => CliError::config(config_key(block, &field), reason),
            E::ResonantDrive { .. } => CliError::config("drive.frequency_hz", err.to_string()),
            E::TruncationInsufficient(_) | E::MemoryBudget { .. } => CliError::config("numerics.cutoff", err.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// Config key for a library field name reported from `block`.
pub fn config_key(block: &str, field: &str) -> String {
    let field = field.strip_prefix("probe.").unwrap_or(field);
    let (head, tail) = match field.split_once('.') {
        Some((h, t)) => (h, Some(t)),
        None => (field, None),
    };
    let renamed = match (block, head) {
        ("trap", "mass") => "mass_amu",
        ("trap", "charge") => "charge_e",
        ("trap", "laser_wavenumber") => "laser_wavelength_m",
        ("trap", "omega") => "frequencies_hz",
        ("trap", "curvature") => "curvature_m",
        ("trap", "linear") => "linear_m",
        ("trap", "resonance_guard") => "resonance_guard_hz",
        ("drive", "amplitude") => "amplitude_v",
        ("drive", "frequency") => "frequency_hz",
        ("drive", "duration") => "duration_s",
        ("probe", "rabi_frequency") => "rabi_frequency_hz",
        ("probe", "detuning") => "detuning_hz",
        ("probe", "pulse_time") => "pulse_time_s",
        ("probe", "coherence_time") => "coherence_time_s",
        ("noise", "rate") => "heating_rates",
        ("cool", "cool_duration") => "cool_duration_s",
        (_, h) => h,
    };
    match tail {
        Some(t) => format!("{block}.{renamed}.{t}"),
        None => format!("{block}.{renamed}"),
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " "))
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { key, message } => write!(f, "error kind=config key={key} msg={}", quote(message)),
            CliError::Numerical(m) => write!(f, "error kind=numerical msg={}", quote(m)),
            CliError::Io { path, message } => write!(f, "error kind=io path={} msg={}", quote(path), quote(message)),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_follow_config_names() {
        assert_eq!(config_key("trap", "mass"), "trap.mass_amu");
        assert_eq!(config_key("trap", "omega.z"), "trap.frequencies_hz.z");
        assert_eq!(config_key("probe", "probe.lamb_dicke"), "probe.lamb_dicke");
        assert_eq!(config_key("cool", "cycles"), "cool.cycles");
    }

    #[test]
    fn messages_are_single_line() {
        let e = CliError::config("trap.mass_amu", "bad\nvalue \"x\"");
        let s = e.to_string();
        assert!(!s.contains('\n'));
        assert_eq!(s, "error kind=config key=trap.mass_amu msg=\"bad value \\\"x\\\"\"");
        assert_eq!(e.exit_code(), 2);
    }
}
