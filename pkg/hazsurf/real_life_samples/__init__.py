# hazsurf/real_life_samples/__init__.py
