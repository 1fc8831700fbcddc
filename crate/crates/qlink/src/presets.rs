//! Run configurations shipped with the binary.

macro_rules! preset {
    ($name:literal) => {
        ($name, include_str!(concat!("../presets/", $name, ".toml")))
    };
}

pub const PRESETS: &[(&str, &str)] = &[
    preset!("intrinsic-transfer"),
    preset!("intrinsic-entangle"),
    preset!("lossless-transfer"),
    preset!("lossless-entangle"),
    preset!("relay-transfer"),
    preset!("relay-entangle"),
    preset!("lossless-relay-transfer"),
    preset!("max-loss-transfer"),
    preset!("loss-ladder"),
    preset!("tf-sweep"),
    preset!("strong-coupling"),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|&(_, t)| t)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}
