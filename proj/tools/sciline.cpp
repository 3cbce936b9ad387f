#include "sciline/pipeline.hpp"

int main(int argc, char** argv) { return sciline::run_cli(argc, argv); }
