//! Built-in copies of the machines shipped in `fixtures/`.

use crate::machines::{parse_transducer, Transducer};

macro_rules! fixture {
    ($fn_name:ident, $file:literal) => {
        pub fn $fn_name() -> Transducer {
            parse_transducer(include_str!(concat!("../fixtures/", $file)))
                .expect(concat!("fixture ", $file, " parses"))
        }
    };
}

fixture!(t0, "t0.fst");
fixture!(t0_renamed, "t0_renamed.fst");
fixture!(t1, "t1.fst");
fixture!(t2, "t2.fst");
fixture!(t2_copy, "t2_copy.fst");
fixture!(mirror, "mirror.fst");
fixture!(mirror2dft, "mirror2dft.fst");
fixture!(identity_forward, "identity_forward.fst");
fixture!(empty, "empty.fst");

/// Every shipped machine with its file name.
pub fn corpus() -> Vec<(&'static str, Transducer)> {
    vec![
        ("t0.fst", t0()),
        ("t0_renamed.fst", t0_renamed()),
        ("t1.fst", t1()),
        ("t2.fst", t2()),
        ("t2_copy.fst", t2_copy()),
        ("mirror.fst", mirror()),
        ("mirror2dft.fst", mirror2dft()),
        ("identity_forward.fst", identity_forward()),
        ("empty.fst", empty()),
    ]
}
