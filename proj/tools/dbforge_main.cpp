#include "dbforge/cli.hpp"

int main(int argc, char** argv) {
    return dbforge::cli::run_main(argc, argv);
}
