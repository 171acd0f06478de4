fn main() {
    ptyremix::cli::main();
}
