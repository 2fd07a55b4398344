#include "stepml/cli.hpp"

int main(int argc, char** argv) { return stepml::main_entry(argc, argv); }
