#include "covalue/pipeline.hpp"

int main(int argc, char** argv) { return covalue::run_cli(argc, argv); }
