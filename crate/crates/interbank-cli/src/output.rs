//! Report and file output.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "interbank-eq-report/1";

/// Pretty JSON with every float written to 17 significant digits.
struct SeventeenDigits<'a>(PrettyFormatter<'a>);

macro_rules! forward {
    ($($name:ident $(($arg:ident: $ty:ty))?),* $(,)?) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)?) -> io::Result<()> {
                self.0.$name(w $(, $arg)?)
            }
        )*
    };
}

impl Formatter for SeventeenDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    forward!(
        begin_array,
        end_array,
        begin_array_value(first: bool),
        end_array_value,
        begin_object,
        end_object,
        begin_object_key(first: bool),
        end_object_key,
        begin_object_value,
        end_object_value,
    );
}

pub fn render_json(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits(PrettyFormatter::new()));
    serde::Serialize::serialize(value, &mut ser).expect("serializing a Value into memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Writes to `out`, or stdout when absent.
pub fn emit(out: Option<&Path>, text: &str) -> io::Result<()> {
    match out {
        Some(p) => fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

/// Shortest round-trip decimal, empty for a missing value.
pub fn csv_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
