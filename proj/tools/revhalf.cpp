#include "revhalf/cli.hpp"

int main(int argc, char** argv) { return revhalf::cli::dispatch(argc, argv); }
