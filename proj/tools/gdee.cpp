#include "gdee/config.hpp"

int main(int argc, char** argv) { return gdee::run_cli(argc, argv); }
