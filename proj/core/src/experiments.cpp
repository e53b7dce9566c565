namespace polyscal {}
