#pragma once

#include "condrep/pdv/calibrate.hpp"
#include "condrep/pdv/nnls.hpp"
#include "condrep/pdv/particles.hpp"
#include "condrep/pdv/surface.hpp"
