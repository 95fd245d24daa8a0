#include "mug/cli/app.hpp"

int main(int argc, char** argv) { return mug::cli::run(argc, argv); }
