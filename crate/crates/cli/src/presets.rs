//! Shipped experiment presets, embedded so `harnack-lab run <name>` works
//! from any directory. The same files live under `presets/` in the repo.

macro_rules! preset {
    ($name:literal) => {
        ($name, include_str!(concat!("../../../presets/", $name, ".cfg")))
    };
}

pub const ALL: &[(&str, &str)] = &[
    preset!("sharp-liyau"),
    preset!("sharp-matrix-liyau"),
    preset!("solver-convergence"),
    preset!("quadratic-cost"),
    preset!("cost-compare-sharp"),
    preset!("sharp-harnack"),
    preset!("sharp-cheeger-yau"),
    preset!("generic-liyau"),
    preset!("generic-harnack"),
    preset!("generic-cheeger-yau"),
    preset!("ab-barenblatt"),
    preset!("ab-generic"),
    preset!("flow-sharp"),
    preset!("flow-generic"),
    preset!("volume-sharp"),
    preset!("volume-uniform"),
    preset!("volume-generic"),
    preset!("classical-liyau"),
    preset!("sweep-liyau"),
];

pub fn find(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
