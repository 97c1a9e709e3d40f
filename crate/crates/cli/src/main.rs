fn main() {
    println!("cardkit");
}
