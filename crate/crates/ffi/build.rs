fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let out = std::path::Path::new(&crate_dir).join("include").join("lw.h");
    std::fs::create_dir_all(out.parent().unwrap()).unwrap();
    match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_language(cbindgen::Language::C)
        .with_include_guard("LW_CAPI_H")
        .with_cpp_compat(true)
        .generate()
    {
        Ok(b) => {
            b.write_to_file(out);
        }
        Err(e) => {
            // Header generation failing should not break the build of the
            // library itself; surface it as a warning.
            println!("cargo:warning=cbindgen failed: {e}");
        }
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
}
