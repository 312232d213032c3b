#include "kflow/cli.hpp"

int main(int argc, char** argv) { return kflow::dispatch(argc, argv); }
