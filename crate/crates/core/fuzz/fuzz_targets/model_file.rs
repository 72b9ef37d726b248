#![no_main]

use ceg::io::{Model, ModelFile};
use ceg::positions::build_transporter_ceg;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = ModelFile::parse(text) else { return };
    // serialize -> parse -> serialize must be stable
    let once = file.to_json();
    assert_eq!(ModelFile::parse(&once).unwrap().to_json(), once);
    match file.load() {
        Ok(Model::Tree(tree)) => {
            if tree.validate().is_valid() && tree.vertex_count() < 2000 {
                let g = build_transporter_ceg(&tree).unwrap();
                assert!(g.position_count() <= tree.vertex_count());
            }
        }
        Ok(Model::Ceg(g)) => {
            let again = ModelFile::from_ceg(&g, None, None).to_json();
            let Model::Ceg(h) = ModelFile::parse(&again).unwrap().load().unwrap() else { panic!() };
            assert!(g.is_isomorphic(&h));
        }
        Err(_) => {}
    }
});
