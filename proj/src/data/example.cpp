#include "r2d/data/example.hpp"
