#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// Placeholder; the acceptance suite is registered in acceptance_criteria.cpp.
