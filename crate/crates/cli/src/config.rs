//! Flat TOML parameter files and the flag/file/default merge.
//!
//! Every subcommand declares its keys once with [`params!`]. That expands to
//! a clap argument struct whose fields are all optional and double as the
//! strict file schema, plus a resolved struct holding final values.
//! Precedence: command-line flag, then config file, then built-in default.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::CliError;

/// Clap value parser for paths that must already exist.
pub fn existing_file(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("file '{s}' does not exist"))
    }
}

/// Reads a flat TOML file into `T`. Unknown keys, wrong types and syntax
/// errors are reported with the line and column.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Default value as shown in `--help`.
pub trait ShowDefault {
    fn show(&self) -> String;
}

macro_rules! show_display {
    ($($t:ty),*) => {
        $(impl ShowDefault for $t {
            fn show(&self) -> String {
                self.to_string()
            }
        })*
    };
}

show_display!(usize, u64, bool, String);

impl ShowDefault for f64 {
    fn show(&self) -> String {
        format!("{self:?}")
    }
}

impl<T: ShowDefault> ShowDefault for Vec<T> {
    fn show(&self) -> String {
        if self.is_empty() {
            "none".into()
        } else {
            self.iter().map(ShowDefault::show).collect::<Vec<_>>().join(",")
        }
    }
}

pub(crate) fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("field `{field}`: must be > 0, got {v}")))
    }
}

pub(crate) fn non_negative(field: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("field `{field}`: must be >= 0, got {v}")))
    }
}

pub(crate) fn finite(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("field `{field}`: must be finite, got {v}")))
    }
}

pub(crate) fn in_range(field: &str, v: f64, lo: f64, hi: f64) -> Result<(), CliError> {
    if v >= lo && v <= hi {
        Ok(())
    } else {
        Err(CliError::Config(format!("field `{field}`: must lie in [{lo}, {hi}], got {v}")))
    }
}

pub(crate) fn at_least(field: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::Config(format!("field `{field}`: must be >= {min}, got {v}")))
    }
}

/// Declares a parameter set. Each entry is `name: type = default, "help";`
/// and the help text must start with a unit tag such as `[MHz]`. Entries in
/// the trailing `optional` block have no default and resolve to `Option`.
macro_rules! params {
    (
        $(#[$smeta:meta])*
        $args:ident => $res:ident {
            $( $(#[$fmeta:meta])* $field:ident : $ty:ty = $default:expr, $help:literal; )*
        }
        $( optional {
            $( $(#[$ometa:meta])* $ofield:ident : $oty:ty, $ohelp:literal; )*
        } )?
    ) => {
        $(#[$smeta])*
        #[derive(Debug, Clone, Default, clap::Args, serde::Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $args {
            #[arg(
                long,
                value_name = "FILE",
                value_parser = $crate::config::existing_file,
                help = "[path] flat TOML file with any of the keys below (flag names with '_'); flags take precedence"
            )]
            #[serde(skip)]
            pub config: Option<std::path::PathBuf>,
            $(
                #[arg(long, allow_negative_numbers = true, help = format!("{} (default: {})", $help, $crate::config::ShowDefault::show(&{ let d: $ty = $default; d })))]
                $(#[$fmeta])*
                pub $field: Option<$ty>,
            )*
            $($(
                #[arg(long, allow_negative_numbers = true, help = $ohelp)]
                $(#[$ometa])*
                pub $ofield: Option<$oty>,
            )*)?
        }

        #[derive(Debug, Clone, PartialEq)]
        pub struct $res {
            $( pub $field: $ty, )*
            $($( pub $ofield: Option<$oty>, )*)?
        }

        impl $args {
            /// Merges flags over the config file over the defaults.
            pub fn resolve(&self) -> Result<$res, $crate::CliError> {
                let file: $args = match &self.config {
                    Some(p) => $crate::config::load(p)?,
                    None => Self::default(),
                };
                Ok($res {
                    $( $field: self.$field.clone().or(file.$field).unwrap_or_else(|| $default), )*
                    $($( $ofield: self.$ofield.clone().or(file.$ofield), )*)?
                })
            }
        }
    };
}

pub(crate) use params;
