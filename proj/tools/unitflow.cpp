#include "unitflow/cli/app.hpp"

int main(int argc, char** argv) { return unitflow::cli::run(argc, argv); }
