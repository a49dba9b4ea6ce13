#pragma once

#include "noonforge/device.hpp"
#include "noonforge/errors.hpp"
#include "noonforge/fock.hpp"
#include "noonforge/herald.hpp"
#include "noonforge/io.hpp"
#include "noonforge/optimize.hpp"
#include "noonforge/parallel.hpp"
