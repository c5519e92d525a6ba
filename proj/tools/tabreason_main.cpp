#include "tabreason/cli.hpp"

int main(int argc, char** argv) { return tabreason::dispatch(argc, argv); }
