// Placeholder entry point; the subcommand wiring lands with the CLI module.
int main() { return 0; }
