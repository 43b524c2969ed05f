#include <string>
#include <vector>

#include "dalmp/cli.hpp"

int main(int argc, char** argv) { return dalmp::run_cli(std::vector<std::string>(argv + 1, argv + argc)); }
