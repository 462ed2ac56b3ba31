fn main() {
    std::process::exit(cogmesh::cli::cli_main(std::env::args()));
}
