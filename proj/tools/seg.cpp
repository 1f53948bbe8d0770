#include "extrseg/cli.hpp"

int main(int argc, char** argv) { return extrseg::cli_dispatch(argc, argv); }
