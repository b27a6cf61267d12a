#include "vseg/experiment.hpp"

int main(int argc, char** argv) { return vseg::cli_main(argc, argv); }
